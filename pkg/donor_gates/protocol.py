"""
协议装配: τ 校准、ancilla 重聚焦双循环、两 ancilla 复合门 (含噪声注入)

比特顺序:
- 双循环 (4 维): ancilla, data
- 复合门 (8 维): ancilla1, ancilla2, data

X 重聚焦脉冲理想且瞬时
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from .control import ShiftSpec, ShuttleSchedule, apply_shift
from .dynamics import CycleRun, adiabatic_cycle, constant_unitary
from .gate_algebra import (
    COMPOSITE_QUBITS, CycleParams, DiagonalGate, DoubleCycleNet, build_zzc, composite_ideal,
    double_cycle_net, embed_diagonal, embed_operator, from_phase_polynomial, phase_polynomial,
    wrap_phase, x_string_matrix,
)
from .spin_model import SpinPairParams, cz_rate, dwell_phases, electron_idle_phases, hamiltonian, hyperfine_at
from .utils import NumericalError

logger = logging.getLogger(__name__)

CALIBRATION_MODES = ("dwell", "total")
PAIR_QUBITS = ("ancilla", "data")

_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


# ============================================
# τ 校准
# ============================================
def calibrate_tau(params: SpinPairParams, schedule: ShuttleSchedule, mode: str = "dwell",
                  dt: Optional[float] = None) -> float:
    """
    选择停留时长 τ, 使条件相位为 π

    Args:
        params: 自旋对参数
        schedule: 提供渐变与 E_rop 的时间表 (其 tau 被忽略)
        mode: "dwell" 只校准停留段 f(τ) = π (停留段精确传播, 解析解即精确);
              "total" 校准单次循环的总条件相位 c + f = π, 用一次割线迭代吸收渡越贡献

    Returns:
        float: τ, ns

    Raises:
        NumericalError: ROP 处 cz_rate 为零 (A_max = 0)
    """
    if mode not in CALIBRATION_MODES:
        raise ValueError(f"未知校准模式: {mode}, 可选 {CALIBRATION_MODES}")

    a_rop = hyperfine_at(params.hyperfine, schedule.e_rop)
    rate = cz_rate(params, a_rop)
    if rate == 0.0:
        raise NumericalError("ROP 处条件相位速率为零, 无法校准 τ")
    period = 2 * math.pi / abs(rate)
    tau = 0.5 * period
    if mode == "dwell":
        logger.info(f"✅ τ = {tau:.9f} ns (停留段解析, ω_zz = {rate:.6f} rad/ns)")
        return tau

    def total_conditional(t: float) -> float:
        cycle = adiabatic_cycle(params, schedule.with_tau(t), dt).cycle
        return cycle.c + cycle.f

    # 相位随 τ 线性累积, 一次割线即收敛
    t0, t1 = tau, 1.5 * tau
    y0 = wrap_phase(total_conditional(t0) - math.pi)
    y1 = wrap_phase(total_conditional(t1) - math.pi)
    slope = wrap_phase(y1 - y0) / (t1 - t0)
    tau = (t0 - y0 / slope) % period
    logger.info(f"✅ τ = {tau:.9f} ns (总相位割线校准)")
    return tau


# ============================================
# 时间布局
# ============================================
def cycle_duration(schedule: ShuttleSchedule, tau: float, transit_idle_ns: float = 0.0) -> float:
    return 2 * schedule.t_ramp + tau + transit_idle_ns


def double_cycle_layout(schedule: ShuttleSchedule, tau: float, transit_idle_ns: float = 0.0,
                        start: float = 0.0) -> Dict[str, float]:
    """双循环的时间标记: ancilla X 的时刻与结束时刻"""
    first = cycle_duration(schedule, tau, transit_idle_ns)
    return {"ancilla": start + first, "end": start + first + cycle_duration(schedule, 0.0, transit_idle_ns)}


def composite_layout(schedule: ShuttleSchedule, tau: float, transit_idle_ns: float = 0.0,
                     travel_time_ns: float = 0.0) -> Dict[str, float]:
    """复合门的三个重聚焦脉冲时刻与总时长"""
    dc1 = double_cycle_layout(schedule, tau, transit_idle_ns)
    data_flip = dc1["end"] + travel_time_ns
    dc2 = double_cycle_layout(schedule, tau, transit_idle_ns, start=data_flip)
    return {"ancilla1": dc1["ancilla"], "data": data_flip, "ancilla2": dc2["ancilla"], "end": dc2["end"]}


# ============================================
# 结果类型
# ============================================
@dataclass(frozen=True, eq=False)
class ProtocolRun:
    """
    一次协议仿真

    Attributes:
        realized: 实际酉矩阵 (双循环 4×4, 复合门 8×8)
        ideal: 理想参照 (纠缠部分恰为 CZ / CZ·CZ, 单比特修正取自无噪声循环)
        transit_reference: 无噪声渡越相位 + 实际停留相位拼出的参照, 用于隔离渡越通道
        refocus_times: 各重聚焦 X 脉冲时刻, ns
        noise: 施加的电场偏移
        cycles: 实际循环参数 (按时间顺序)
        reference_cycles: 无噪声循环参数 (τ 循环, 零停留循环)
        qubits: 比特名称
        t_total: 协议总时长, ns
        idle_phases: 空闲 ancilla 累积的塞曼相位
        leakage: 各循环端点本征基中泄漏的最大值
    """

    realized: np.ndarray
    ideal: np.ndarray
    transit_reference: np.ndarray
    refocus_times: Dict[str, float]
    noise: Optional[ShiftSpec]
    cycles: Tuple[CycleParams, ...]
    reference_cycles: Tuple[CycleParams, CycleParams]
    qubits: Tuple[str, ...]
    t_total: float
    idle_phases: Dict[str, float] = field(default_factory=dict)
    leakage: float = 0.0

    def __post_init__(self):
        dim = 2 ** len(self.qubits)
        for name in ("realized", "ideal", "transit_reference"):
            if getattr(self, name).shape != (dim, dim):
                raise ValueError(f"{name} 维度与比特数 {len(self.qubits)} 不符")
        for label, t in self.refocus_times.items():
            if not 0.0 < t < self.t_total:
                raise ValueError(f"重聚焦时刻 {label} = {t} ns 不在时间线内部")


# ============================================
# 单次循环 (含渡越空闲)
# ============================================
@dataclass(frozen=True, eq=False)
class _PairCycle:
    unitary: np.ndarray
    cycle: CycleParams
    leakage: float


def _idle_field(schedule: ShuttleSchedule, noise: Optional[ShiftSpec], t: float) -> float:
    offset = 0.0 if noise is None else noise.offset_at(t)
    return schedule.e_start + offset


def _pair_cycle(params: SpinPairParams, schedule: ShuttleSchedule, tau: float,
                noise: Optional[ShiftSpec], start: float, timeline_end: float,
                transit_idle_ns: float, dt: Optional[float]) -> _PairCycle:
    cycle_schedule = schedule.with_tau(tau)
    run: CycleRun = adiabatic_cycle(
        params, apply_shift(cycle_schedule, noise, start, timeline_end), dt)
    unitary = run.propagation.unitary
    cycle = run.cycle
    if transit_idle_ns > 0:
        t_mid = start + cycle_schedule.t_total + 0.5 * transit_idle_ns
        a_idle = hyperfine_at(params.hyperfine, _idle_field(schedule, noise, t_mid))
        unitary = constant_unitary(hamiltonian(params, a_idle), transit_idle_ns) @ unitary
        pa, pb, pc = dwell_phases(params, a_idle, transit_idle_ns)
        cycle = replace(cycle, a=wrap_phase(cycle.a + pa), b=wrap_phase(cycle.b + pb),
                        c=wrap_phase(cycle.c + pc))
    return _PairCycle(unitary, cycle, run.leakage)


def reference_cycles(params: SpinPairParams, schedule: ShuttleSchedule, tau: float,
                     transit_idle_ns: float = 0.0, dt: Optional[float] = None
                     ) -> Tuple[CycleParams, CycleParams]:
    """无噪声的 (τ 循环, 零停留循环) 参数"""
    horizon = cycle_duration(schedule, tau, transit_idle_ns) + cycle_duration(schedule, 0.0, transit_idle_ns)
    first = _pair_cycle(params, schedule, tau, None, 0.0, horizon, transit_idle_ns, dt)
    second = _pair_cycle(params, schedule, 0.0, None, 0.0, horizon, transit_idle_ns, dt)
    return first.cycle, second.cycle


def _ideal_net(references: Tuple[CycleParams, CycleParams]) -> DoubleCycleNet:
    """Z_d ⊗ Z_g · CZ_π, 之后 ancilla 上一个 X"""
    net = double_cycle_net(*references)
    return DoubleCycleNet(build_zzc(net.ancilla_phase, net.data_phase, math.pi))


def _mixed_cycle(reference: CycleParams, realized: CycleParams) -> CycleParams:
    return replace(reference, d=realized.d, e=realized.e, f=realized.f, tau=realized.tau)


def _double_cycle(params, schedule, tau, noise, start, timeline_end, transit_idle_ns, dt, cache):
    """(4×4 实际酉矩阵, (cycle1, cycle2), 泄漏); 静态或无噪声时按 τ 复用"""
    static = noise is None or noise.kind == "static"
    layout = double_cycle_layout(schedule, tau, transit_idle_ns, start)
    parts = []
    for t_dwell, t0 in ((tau, start), (0.0, layout["ancilla"])):
        key = t_dwell if static else (t_dwell, t0)
        if key not in cache:
            cache[key] = _pair_cycle(params, schedule, t_dwell, noise, t0, timeline_end, transit_idle_ns, dt)
        parts.append(cache[key])
    x_anc = np.kron(_PAULI_X, np.eye(2))
    unitary = parts[1].unitary @ x_anc @ parts[0].unitary
    return unitary, (parts[0].cycle, parts[1].cycle), max(p.leakage for p in parts)


# ============================================
# 双循环
# ============================================
def double_cycle_run(params: SpinPairParams, schedule: ShuttleSchedule, tau: float,
                     noise: Optional[ShiftSpec] = None, transit_idle_ns: float = 0.0,
                     dt: Optional[float] = None,
                     references: Optional[Tuple[CycleParams, CycleParams]] = None) -> ProtocolRun:
    """
    循环(τ) → ancilla 上的 X → 循环(零停留)

    Args:
        params: 自旋对参数
        schedule: 渐变时间表
        tau: 已校准的停留时长
        noise: 电场偏移 (alternating 的 flip_time 为协议全局时间)
        transit_idle_ns: 每次循环渡越末尾附加的均匀塞曼空闲
        dt: 渐变段步长
        references: 预先算好的无噪声循环参数, 扫描时复用

    Raises:
        LeakageError: 任一循环泄漏过大
    """
    layout = double_cycle_layout(schedule, tau, transit_idle_ns)
    if references is None:
        references = reference_cycles(params, schedule, tau, transit_idle_ns, dt)

    realized, cycles, leakage = _double_cycle(
        params, schedule, tau, noise, 0.0, layout["end"], transit_idle_ns, dt, {})

    ideal = _ideal_net(references).matrix()
    mixed = double_cycle_net(_mixed_cycle(references[0], cycles[0]),
                             _mixed_cycle(references[1], cycles[1])).matrix()
    return ProtocolRun(
        realized=realized, ideal=ideal, transit_reference=mixed,
        refocus_times={"ancilla": layout["ancilla"]}, noise=noise, cycles=cycles,
        reference_cycles=references, qubits=PAIR_QUBITS, t_total=layout["end"], leakage=leakage,
    )


# ============================================
# 复合门
# ============================================
def _idle_operator(params: SpinPairParams, qubit: int, duration: float) -> np.ndarray:
    return embed_operator(np.diag(electron_idle_phases(params, duration)), (qubit,), 3)


def composite_run(params: SpinPairParams, schedule: ShuttleSchedule, tau: float,
                  noise: Optional[ShiftSpec] = None, transit_idle_ns: float = 0.0,
                  travel_time_ns: float = 0.0, dt: Optional[float] = None,
                  references: Optional[Tuple[CycleParams, CycleParams]] = None) -> ProtocolRun:
    """
    双循环(ancilla1, data) → data 上的 X → 双循环(ancilla2, data)

    空闲 ancilla 只受电子塞曼作用, 其相位精确记入理想参照的单比特修正;
    两个双循环之间可插入 travel_time_ns 的穿梭间隔 (ancilla1 与 data 停在 E_start)
    """
    layout = composite_layout(schedule, tau, transit_idle_ns, travel_time_ns)
    if references is None:
        references = reference_cycles(params, schedule, tau, transit_idle_ns, dt)
    end = layout["end"]
    dc_duration = layout["ancilla1"] + cycle_duration(schedule, 0.0, transit_idle_ns)

    cache: Dict = {}
    pair1, cycles1, leak1 = _double_cycle(params, schedule, tau, noise, 0.0, end, transit_idle_ns, dt, cache)
    if noise is not None and noise.kind == "alternating":
        cache = {}
    pair2, cycles2, leak2 = _double_cycle(params, schedule, tau, noise, layout["data"], end,
                                          transit_idle_ns, dt, cache)

    # 两个双循环之间的穿梭间隔: (ancilla1, data) 停在 E_start
    travel_unitary = np.eye(4, dtype=complex)
    travel_phases = (0.0, 0.0, 0.0)
    if travel_time_ns > 0:
        t_mid = dc_duration + 0.5 * travel_time_ns
        a_travel = hyperfine_at(params.hyperfine, _idle_field(schedule, noise, t_mid))
        travel_unitary = constant_unitary(hamiltonian(params, a_travel), travel_time_ns)
        a_nominal = hyperfine_at(params.hyperfine, schedule.e_start)
        travel_phases = dwell_phases(params, a_nominal, travel_time_ns)

    idle_a2 = dc_duration + travel_time_ns
    idle_a1 = dc_duration
    realized = (
        _idle_operator(params, 0, idle_a1) @ embed_operator(pair2, (1, 2), 3)
        @ embed_operator(_PAULI_X, (2,), 3)
        @ embed_operator(travel_unitary, (0, 2), 3)
        @ _idle_operator(params, 1, idle_a2) @ embed_operator(pair1, (0, 2), 3)
    )

    zeeman = params.electron_zeeman
    idle_phases = (wrap_phase(zeeman * idle_a1), wrap_phase(zeeman * idle_a2))
    travel = embed_diagonal(build_zzc(*travel_phases), (0, 2), 3) if travel_time_ns > 0 else None

    net = _ideal_net(references)
    ideal = composite_ideal(net, net, travel, idle_phases)
    mixed = composite_ideal(
        double_cycle_net(_mixed_cycle(references[0], cycles1[0]), _mixed_cycle(references[1], cycles1[1])),
        double_cycle_net(_mixed_cycle(references[0], cycles2[0]), _mixed_cycle(references[1], cycles2[1])),
        travel, idle_phases)

    logger.debug(f"复合门完成: 总时长 {end:.3f} ns, 泄漏 {max(leak1, leak2):.2e}")
    return ProtocolRun(
        realized=realized, ideal=ideal.matrix(), transit_reference=mixed.matrix(),
        refocus_times={k: layout[k] for k in ("ancilla1", "data", "ancilla2")},
        noise=noise, cycles=cycles1 + cycles2, reference_cycles=references,
        qubits=COMPOSITE_QUBITS, t_total=end,
        idle_phases={"ancilla1": idle_phases[0], "ancilla2": idle_phases[1]},
        leakage=max(leak1, leak2),
    )


def entangling_part(run: ProtocolRun):
    """实际酉矩阵对角部分 (去掉末尾 X 串) 的多比特相位项"""
    n = len(run.qubits)
    mask = int(np.argmax(np.abs(run.ideal[:, 0])))
    diagonal = x_string_matrix(mask, n) @ run.realized
    terms = phase_polynomial(DiagonalGate(n, tuple(np.angle(np.diag(diagonal)).tolist())))
    return from_phase_polynomial(n, {s: t for s, t in terms.items() if len(s) >= 2})


__all__ = [
    "CALIBRATION_MODES", "PAIR_QUBITS", "calibrate_tau", "cycle_duration",
    "double_cycle_layout", "composite_layout", "ProtocolRun", "reference_cycles",
    "double_cycle_run", "composite_run", "entangling_part",
]
