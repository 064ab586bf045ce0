"""
误差分析: 通道分解、最坏情况 Born 概率、扫描驱动、漂移换算

通道:
- leakage: D = realized · ideal† 的行非对角质量最大值
- Z 串通道: diag(D) 的相位做 Walsh-Hadamard 展开, δ_s 为该通道的转角, 最坏概率 sin²(δ/2)
  标签按比特顺序书写, 如 "IZ" (双循环的 data) 或 "ZIZ" (复合门 ancilla1·data)
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import hadamard

from .control import ShiftSpec, ShuttleSchedule
from .dynamics import ramp_flip_flop_probability, ramp_schedule
from .gate_algebra import wrap_phase
from .protocol import ProtocolRun, composite_layout, composite_run, reference_cycles
from .spin_model import SpinPairParams
from .utils import ConfigError

logger = logging.getLogger(__name__)

# 低于此概率视为数值零点, 不参与斜率拟合
PROBABILITY_FLOOR = 1e-20
MONOTONE_FLOOR = 1e-12
DEFAULT_FIT_RANGE = (1e-3, 1e-1)
# 无噪声门的泄漏上限; 超过时扫描结果被泄漏底噪掩盖
LEAKAGE_BOUND = 1e-6

# 漂移估计 (电荷漂移 0.15 × 22 mV, 杠杆臂 0.026 MV/m 每 mV)
DRIFT_MV = 0.15 * 22.0
LEVER_ARM_MV_PER_M_PER_MV = 0.026
SLOW_REFERENCE_S = 0.1 * 86400.0
FAST_TARGET_S = 1e-3

LEAKAGE_CHANNEL = "leakage"
TRANSIT_CHANNEL = "transit"


# ============================================
# 通道分解
# ============================================
def channel_labels(num_qubits: int) -> List[str]:
    """非平凡 Z 串, 按 Walsh 指标 s = 1 .. 2^n - 1 排列"""
    labels = []
    for s in range(1, 2 ** num_qubits):
        labels.append("".join("Z" if s & (1 << (num_qubits - 1 - q)) else "I" for q in range(num_qubits)))
    return labels


def worst_case_probability(delta: float) -> float:
    """相位通道 δ 的最坏情况 Born 概率 sin²(δ/2)"""
    return float(math.sin(0.5 * delta) ** 2)


@dataclass(frozen=True)
class ChannelReport:
    """
    一次运行相对理想参照的误差通道

    Attributes:
        qubits: 比特名称
        leakage_probability: 任一基矢离开自身的最大概率
        deltas: Z 串标签 → 转角 δ (rad)
    """

    qubits: Tuple[str, ...]
    leakage_probability: float
    deltas: Dict[str, float]

    @property
    def worst_case(self) -> Dict[str, float]:
        return {label: worst_case_probability(d) for label, d in self.deltas.items()}

    @property
    def max_phase_probability(self) -> float:
        return max(self.worst_case.values())

    @property
    def total_error(self) -> float:
        return min(1.0, self.leakage_probability + sum(self.worst_case.values()))


def phase_channels(phases: Sequence[float]) -> Dict[str, float]:
    """
    对角相位向量 → Z 串转角

    φ(x) = c_0 + Σ_s c_s (-1)^{s·x}, c = H φ / 2^n, δ_s = -2 c_s
    """
    phases = np.asarray(phases, dtype=float)
    n = int(round(math.log2(phases.size)))
    relative = wrap_phase(phases - phases[0])
    coeff = hadamard(phases.size) @ relative / phases.size
    return {label: float(-2 * coeff[s]) for s, label in enumerate(channel_labels(n), start=1)}


def reconstruct_phases(deltas: Dict[str, float], num_qubits: int) -> np.ndarray:
    """Walsh-Hadamard 反变换, 返回去掉全局相位后的对角相位"""
    coeff = np.zeros(2 ** num_qubits)
    for s, label in enumerate(channel_labels(num_qubits), start=1):
        coeff[s] = -0.5 * deltas.get(label, 0.0)
    phases = hadamard(2 ** num_qubits) @ coeff
    return phases - phases[0]


def decompose_unitary(realized: np.ndarray, ideal: np.ndarray,
                      qubits: Optional[Sequence[str]] = None) -> ChannelReport:
    """
    D = realized · ideal† 的通道分解

    Raises:
        ValueError: 维度不一致
    """
    realized = np.asarray(realized)
    ideal = np.asarray(ideal)
    if realized.shape != ideal.shape or realized.shape[0] != realized.shape[1]:
        raise ValueError(f"维度不一致: {realized.shape} vs {ideal.shape}")
    n = int(round(math.log2(realized.shape[0])))
    if qubits is None:
        qubits = tuple(f"q{k}" for k in range(n))

    d = realized @ ideal.conj().T
    mass = np.abs(d) ** 2
    leakage = float(np.clip(np.max(mass.sum(axis=1) - np.diag(mass)), 0.0, 1.0))
    return ChannelReport(tuple(qubits), leakage, phase_channels(np.angle(np.diag(d))))


def channel_decompose(run: ProtocolRun) -> ChannelReport:
    """实际酉矩阵相对理想参照的通道报告"""
    return decompose_unitary(run.realized, run.ideal, run.qubits)


def transit_residual(run: ProtocolRun) -> ChannelReport:
    """
    相对 "无噪声渡越 + 实际停留" 参照的残差, 只剩下渡越相位 (a, g) 未被抵消的部分
    """
    return decompose_unitary(run.realized, run.transit_reference, run.qubits)


def fit_loglog_slope(x: Sequence[float], y: Sequence[float], floor: float = PROBABILITY_FLOOR,
                     fit_range: Optional[Tuple[float, float]] = None) -> float:
    """
    log y 对 log x 的最小二乘斜率; 少于两个有效点返回 nan

    有效点: x > 0, y > floor, 且 x 落在 fit_range 内 (给定时)
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = (x > 0) & (y > floor) & np.isfinite(y)
    if fit_range is not None:
        mask &= (x >= fit_range[0]) & (x <= fit_range[1])
    if np.count_nonzero(mask) < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)[0])


# ============================================
# 穿梭时间扫描
# ============================================
class ShuttleRow(NamedTuple):
    shuttle_time_ns: float
    flip_flop_probability: float


@dataclass(frozen=True)
class ShuttleSweep:
    rows: Tuple[ShuttleRow, ...]
    monotone: bool

    def first_below(self, threshold: float) -> Optional[float]:
        for row in self.rows:
            if row.flip_flop_probability < threshold:
                return row.shuttle_time_ns
        return None


def _shuttle_point(args) -> Tuple[int, float]:
    index, params, e_start, e_rop, t_ramp, dt = args
    schedule = ramp_schedule(e_start, e_rop, t_ramp, dt)
    return index, ramp_flip_flop_probability(params, schedule)


def _run_parallel(worker, tasks: List[tuple], jobs: int) -> Dict[int, object]:
    """任务第一个元素为序号; 结果按序号收集, 与完成顺序无关"""
    results = {}
    if jobs <= 1 or len(tasks) <= 1:
        for task in tasks:
            key, value = worker(task)
            results[key] = value
        return results

    with ProcessPoolExecutor(max_workers=jobs) as executor:
        futures = {executor.submit(worker, task): task[0] for task in tasks}
        for i, future in enumerate(as_completed(futures), 1):
            key, value = future.result()
            results[key] = value
            logger.debug(f"进度: {i}/{len(tasks)}")
    return results


def sweep_shuttle_time(params: SpinPairParams, e_start: float, e_rop: float, times: Iterable[float],
                       dt: Optional[float] = None, jobs: int = 1) -> ShuttleSweep:
    """
    单程渐变时长扫描: flip-flop 概率随穿梭时间的变化

    Args:
        params: 自旋对参数 (B 取自其中)
        e_start, e_rop: 渐变端点电场
        times: 穿梭时间列表, ns
        dt: 渐变步长, 默认取不大于 DEFAULT_DT 且整除每个时间的值
        jobs: 并行进程数
    """
    times = [float(t) for t in times]
    if not times:
        raise ConfigError("穿梭时间列表为空")
    if any(t <= 0 for t in times):
        raise ConfigError(f"穿梭时间必须为正: {times}")

    logger.info(f"⏳ 穿梭时间扫描: {len(times)} 点, B = {params.b_field_mt} mT")
    tasks = [(k, params, e_start, e_rop, t, dt) for k, t in enumerate(times)]
    results = _run_parallel(_shuttle_point, tasks, jobs)
    rows = tuple(ShuttleRow(t, results[k]) for k, t in enumerate(times))

    ordered = sorted(rows)
    monotone = all(b.flip_flop_probability <= a.flip_flop_probability + MONOTONE_FLOOR
                   for a, b in zip(ordered, ordered[1:]))
    if not monotone:
        logger.warning("⚠️ flip-flop 概率随穿梭时间并非单调下降")
    return ShuttleSweep(rows, monotone)


# ============================================
# 电场偏移扫描
# ============================================
class ShiftRow(NamedTuple):
    kind: str
    delta_e: float
    channel: str
    delta_rad: float
    worst_case_probability: float


@dataclass(frozen=True)
class ShiftSweep:
    rows: Tuple[ShiftRow, ...]
    slopes: Dict[Tuple[str, str], float]

    def probability(self, kind: str, delta_e: float, channel: str) -> float:
        for row in self.rows:
            if row.kind == kind and row.delta_e == delta_e and row.channel == channel:
                return row.worst_case_probability
        raise KeyError((kind, delta_e, channel))

    @property
    def max_leakage(self) -> float:
        return max(row.worst_case_probability for row in self.rows if row.channel == LEAKAGE_CHANNEL)

    @property
    def adiabatic(self) -> bool:
        """所有点的泄漏都低于 LEAKAGE_BOUND"""
        return self.max_leakage < LEAKAGE_BOUND


def _shift_point(args) -> Tuple[int, Dict[str, Tuple[float, float]]]:
    """单个 (kind, ΔE): 返回 通道 → (δ, 最坏概率); alternating 对各重聚焦脉冲取最坏"""
    index, params, schedule, tau, kind, delta_e, options, references = args
    layout = composite_layout(schedule, tau, options["transit_idle_ns"], options["travel_time_ns"])
    if kind == "static":
        specs = [ShiftSpec("static", delta_e)]
    else:
        specs = [ShiftSpec("alternating", delta_e, layout[pulse]) for pulse in ("ancilla1", "data", "ancilla2")]

    worst: Dict[str, Tuple[float, float]] = {}
    for spec in specs:
        run = composite_run(params, schedule, tau, spec, options["transit_idle_ns"],
                            options["travel_time_ns"], options["dt"], references)
        report = channel_decompose(run)
        residual = transit_residual(run)
        entries = {label: (d, worst_case_probability(d)) for label, d in report.deltas.items()}
        entries[LEAKAGE_CHANNEL] = (float("nan"), report.leakage_probability)
        entries[TRANSIT_CHANNEL] = (float("nan"), residual.max_phase_probability)
        for label, (d, p) in entries.items():
            if label not in worst or p > worst[label][1]:
                worst[label] = (d, p)
    return index, worst


def sweep_shift(params: SpinPairParams, schedule: ShuttleSchedule, tau: float,
                kinds: Sequence[str], deltas: Sequence[float], transit_idle_ns: float = 0.0,
                travel_time_ns: float = 0.0, dt: Optional[float] = None, jobs: int = 1,
                fit_range: Tuple[float, float] = DEFAULT_FIT_RANGE) -> ShiftSweep:
    """
    复合门对静态 / 交替电场偏移的敏感度

    Returns:
        ShiftSweep: 行 (kind, ΔE, channel, δ, 最坏概率) 与每个 (kind, channel) 的 log-log 斜率
    """
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise ConfigError("ΔE 列表为空")
    for kind in kinds:
        if kind not in ("static", "alternating"):
            raise ConfigError(f"未知偏移类型: {kind}")

    references = reference_cycles(params, schedule, tau, transit_idle_ns, dt)
    options = {"transit_idle_ns": transit_idle_ns, "travel_time_ns": travel_time_ns, "dt": dt}
    points = [(kind, d) for kind in kinds for d in deltas]
    logger.info(f"⏳ 电场偏移扫描: {len(points)} 点")
    tasks = [(k, params, schedule, tau, kind, d, options, references) for k, (kind, d) in enumerate(points)]
    results = _run_parallel(_shift_point, tasks, jobs)

    rows = []
    for k, (kind, d) in enumerate(points):
        for label, (delta, prob) in results[k].items():
            rows.append(ShiftRow(kind, d, label, delta, prob))

    slopes = {}
    for kind in kinds:
        for label in results[0].keys():
            xs = [r.delta_e for r in rows if r.kind == kind and r.channel == label]
            ys = [r.worst_case_probability for r in rows if r.kind == kind and r.channel == label]
            slopes[(kind, label)] = fit_loglog_slope(xs, ys, fit_range=fit_range)
    sweep = ShiftSweep(tuple(rows), slopes)
    if not sweep.adiabatic:
        logger.warning(f"⚠️ 泄漏 {sweep.max_leakage:.2e} 超过 {LEAKAGE_BOUND:.0e}, "
                       f"斜率受泄漏底噪影响, 请加长渐变时间")
    return sweep


# ============================================
# 漂移换算
# ============================================
def drift_to_field(delta_mv: float, lever_arm: float, t_target: float, t_reference: float) -> float:
    """
    电压漂移 → 电场偏移, 按随机游走从参考时间尺度换算到目标时间尺度

    ΔE = ΔV · lever_arm · sqrt(t_target / t_reference)

    Raises:
        ConfigError: 时间非正
    """
    if t_target <= 0 or t_reference <= 0:
        raise ConfigError(f"时间尺度必须为正: t_target = {t_target}, t_reference = {t_reference}")
    return delta_mv * lever_arm * math.sqrt(t_target / t_reference)


def drift_estimates(delta_mv: float = DRIFT_MV, lever_arm: float = LEVER_ARM_MV_PER_M_PER_MV,
                    slow_reference_s: float = SLOW_REFERENCE_S,
                    fast_target_s: float = FAST_TARGET_S) -> Dict[str, float]:
    """慢 (0.1 天) 与快 (毫秒) 涨落对应的 ΔE, MV/m"""
    return {
        "slow": drift_to_field(delta_mv, lever_arm, slow_reference_s, slow_reference_s),
        "fast": drift_to_field(delta_mv, lever_arm, fast_target_s, slow_reference_s),
    }


__all__ = [
    "PROBABILITY_FLOOR", "MONOTONE_FLOOR", "DEFAULT_FIT_RANGE", "LEAKAGE_BOUND", "LEAKAGE_CHANNEL", "TRANSIT_CHANNEL",
    "channel_labels", "worst_case_probability", "ChannelReport", "phase_channels",
    "reconstruct_phases", "decompose_unitary", "channel_decompose", "transit_residual",
    "fit_loglog_slope", "ShuttleRow", "ShuttleSweep", "sweep_shuttle_time",
    "ShiftRow", "ShiftSweep", "sweep_shift", "drift_to_field", "drift_estimates",
]
