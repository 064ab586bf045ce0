"""
控制波形: 穿梭电场时间表 E(t) 及其噪声扰动

时间表 = 渐入 (T_ramp) → 在 ROP 停留 τ → 渐出 (T_ramp)
渐入/渐出使用五次 smootherstep, 端点一阶、二阶导数为零
"""

import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .spin_model import HyperfineModel, hyperfine_at
from .utils import ConfigError, write_result_csv

logger = logging.getLogger(__name__)

# dt 与 T_ramp 可公度判定的相对容差
GRID_TOLERANCE = 1e-9

SHIFT_KINDS = ("static", "alternating")


def smootherstep(x):
    """s(x) = 6x⁵ - 15x⁴ + 10x³, 在 [0, 1] 外截断"""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x ** 3 * (x * (6 * x - 15) + 10)


def smootherstep_derivative(x, order: int = 1):
    """s 的一阶 / 二阶导数 (在 [0, 1] 外为零)"""
    x = np.asarray(x, dtype=float)
    inside = (x >= 0) & (x <= 1)
    if order == 1:
        value = 30 * x ** 2 * (1 - x) ** 2
    elif order == 2:
        value = 60 * x * (1 - x) * (1 - 2 * x)
    else:
        raise ValueError(f"只支持一阶和二阶导数, 收到 order={order}")
    return np.where(inside, value, 0.0)


def grid_steps(duration: float, dt: float, what: str) -> int:
    steps = duration / dt
    n = int(round(steps))
    if n < 1 or abs(steps - n) > GRID_TOLERANCE * max(1.0, steps):
        raise ConfigError(f"dt = {dt} ns 不能整除{what} {duration} ns")
    return n


class Segment(NamedTuple):
    """时间线上的一段: ramp 按 dt 离散传播, hold 为恒定电场可一次精确传播"""

    kind: str
    t_start: float
    t_end: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


# ============================================
# 时间表
# ============================================
@dataclass(frozen=True)
class ShuttleSchedule:
    """
    一次绝热循环的电场时间表

    Attributes:
        e_start: 起止电场 (电离侧), MV/m
        e_rop: ROP 电场, MV/m
        t_ramp: 单程渐变时长, ns
        tau: ROP 停留时长, ns
        dt: 渐变段采样步长, ns (须整除 t_ramp; 停留段精确传播, 不受此限)
    """

    e_start: float
    e_rop: float
    t_ramp: float
    tau: float
    dt: float

    @property
    def t_total(self) -> float:
        return 2 * self.t_ramp + self.tau

    @property
    def ramp_in_end(self) -> float:
        return self.t_ramp

    @property
    def ramp_out_start(self) -> float:
        return self.t_ramp + self.tau

    @property
    def ramp_steps(self) -> int:
        return int(round(self.t_ramp / self.dt))

    def with_tau(self, tau: float) -> "ShuttleSchedule":
        return build_schedule(self.e_start, self.e_rop, self.t_ramp, tau, self.dt)

    def field_at(self, t):
        """E(t), 时间线外保持 E_start"""
        t = np.asarray(t, dtype=float)
        rise = smootherstep(t / self.t_ramp)
        fall = smootherstep((self.t_total - t) / self.t_ramp)
        shape = np.where(t <= self.ramp_in_end, rise,
                         np.where(t >= self.ramp_out_start, fall, 1.0))
        value = self.e_start + (self.e_rop - self.e_start) * shape
        return float(value) if value.ndim == 0 else value

    def derivative(self, t, order: int = 1):
        """解析导数 d^k E / dt^k"""
        t = np.asarray(t, dtype=float)
        scale = (self.e_rop - self.e_start) / self.t_ramp ** order
        rise = smootherstep_derivative(t / self.t_ramp, order)
        fall = smootherstep_derivative((self.t_total - t) / self.t_ramp, order) * (-1) ** order
        value = scale * np.where(t <= self.ramp_in_end, rise,
                                 np.where(t >= self.ramp_out_start, fall, 0.0))
        return float(value) if value.ndim == 0 else value

    def segments(self) -> List[Segment]:
        parts = [Segment("ramp", 0.0, self.ramp_in_end)]
        if self.tau > 0:
            parts.append(Segment("hold", self.ramp_in_end, self.ramp_out_start))
        parts.append(Segment("ramp", self.ramp_out_start, self.t_total))
        return parts

    @property
    def samples(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        (t, E) 采样点, 严格递增

        两个渐变段为步长 dt 的均匀网格; 停留段只取两个端点
        """
        n = self.ramp_steps
        ramp = np.arange(n + 1) * self.dt
        t = np.concatenate([ramp, self.ramp_out_start + ramp]) if self.tau > 0 \
            else np.concatenate([ramp, self.ramp_out_start + ramp[1:]])
        return t, self.field_at(t)


def build_schedule(e_start: float, e_rop: float, t_ramp: float, tau: float, dt: float) -> ShuttleSchedule:
    """
    构造五次多项式渐变的时间表

    Raises:
        ConfigError: 时长非正、参数非有限或 dt 不整除 T_ramp
    """
    for name, value in (("E_start", e_start), ("E_rop", e_rop), ("T_ramp", t_ramp),
                        ("tau", tau), ("dt", dt)):
        if not math.isfinite(value):
            raise ConfigError(f"{name} 必须为有限值: {value}")
    if t_ramp <= 0:
        raise ConfigError(f"T_ramp 必须为正: {t_ramp}")
    if tau < 0:
        raise ConfigError(f"tau 不能为负: {tau}")
    if dt <= 0:
        raise ConfigError(f"dt 必须为正: {dt}")
    grid_steps(t_ramp, dt, "渐变时长")
    return ShuttleSchedule(float(e_start), float(e_rop), float(t_ramp), float(tau), float(dt))


# ============================================
# 电场偏移
# ============================================
@dataclass(frozen=True)
class ShiftSpec:
    """
    电场偏移噪声模型

    static: 全程 +ΔE
    alternating: 在相应重聚焦脉冲 (flip_time, 协议全局时间) 之前 +ΔE/2, 之后 -ΔE/2
    """

    kind: str
    delta_e: float
    flip_time: Optional[float] = None

    def __post_init__(self):
        if self.kind not in SHIFT_KINDS:
            raise ConfigError(f"未知偏移类型: {self.kind}, 可选 {SHIFT_KINDS}")
        if not math.isfinite(self.delta_e):
            raise ConfigError(f"ΔE 必须为有限值: {self.delta_e}")
        if self.kind == "alternating" and (self.flip_time is None or not math.isfinite(self.flip_time)):
            raise ConfigError("alternating 偏移需要有限的 flip_time")

    def offset_at(self, t):
        """协议全局时间 t 处的电场偏移"""
        t = np.asarray(t, dtype=float)
        if self.kind == "static":
            value = np.full(t.shape, self.delta_e)
        else:
            value = np.where(t < self.flip_time, 0.5 * self.delta_e, -0.5 * self.delta_e)
        return float(value) if value.ndim == 0 else value


@dataclass(frozen=True)
class ShiftedSchedule:
    """
    叠加偏移后的时间线; 控制器并不知道偏移, 名义波形不变

    start_time 为本循环在协议全局时间线上的起点
    """

    schedule: ShuttleSchedule
    shift: Optional[ShiftSpec] = None
    start_time: float = 0.0

    @property
    def t_total(self) -> float:
        return self.schedule.t_total

    @property
    def dt(self) -> float:
        return self.schedule.dt

    @property
    def local_flip(self) -> Optional[float]:
        """落在本循环内部 (开区间) 的翻转时刻, 本地时间"""
        if self.shift is None or self.shift.kind != "alternating":
            return None
        local = self.shift.flip_time - self.start_time
        return local if 0.0 < local < self.t_total else None

    def field_at(self, t):
        value = np.asarray(self.schedule.field_at(t), dtype=float)
        if self.shift is not None:
            value = value + self.shift.offset_at(self.start_time + np.asarray(t, dtype=float))
        return float(value) if value.ndim == 0 else value

    def segments(self) -> List[Segment]:
        """
        名义分段在翻转时刻处再切一刀

        Raises:
            ConfigError: 翻转落在渐变段内但不在 dt 网格上
        """
        flip = self.local_flip
        parts = []
        for seg in self.schedule.segments():
            if flip is None or not seg.t_start < flip < seg.t_end:
                parts.append(seg)
                continue
            if seg.kind == "ramp":
                grid_steps(flip - seg.t_start, self.dt, "翻转前的渐变时长")
            parts.append(Segment(seg.kind, seg.t_start, flip))
            parts.append(Segment(seg.kind, flip, seg.t_end))
        return parts


def apply_shift(schedule: ShuttleSchedule, spec: Optional[ShiftSpec],
                start_time: float = 0.0, timeline_end: Optional[float] = None) -> ShiftedSchedule:
    """
    把偏移叠加到时间表上

    Args:
        schedule: 名义时间表
        spec: 偏移模型, None 表示无噪声
        start_time: 本循环在协议时间线上的起点
        timeline_end: 协议时间线终点, 默认为本循环终点

    Raises:
        ConfigError: alternating 的 flip_time 落在时间线之外
    """
    end = start_time + schedule.t_total if timeline_end is None else timeline_end
    if spec is not None and spec.kind == "alternating" and not 0.0 <= spec.flip_time <= end:
        raise ConfigError(f"flip_time = {spec.flip_time} ns 不在时间线 [0, {end}] 内")
    return ShiftedSchedule(schedule, spec, float(start_time))


# ============================================
# 诊断与导出
# ============================================
def derivative_report(schedule: ShuttleSchedule) -> Tuple[float, float]:
    """
    中心差分估计 (max|dE/dt|, max|d²E/dt²|), 单位 MV/(m·ns) 与 MV/(m·ns²)

    每个渐变段在自身 dt 网格上求差分, 两端各外延一个点 (时间线外电场保持不变)
    """
    n = schedule.ramp_steps
    if n + 1 < 5:
        raise ConfigError(f"每个渐变段至少需要 5 个采样点, 当前 {n + 1}")
    dt = schedule.dt
    first, second = 0.0, 0.0
    for start in (0.0, schedule.ramp_out_start):
        t = start + np.arange(-1, n + 2) * dt
        e = schedule.field_at(t)
        d1 = (e[2:] - e[:-2]) / (2 * dt)
        d2 = (e[2:] - 2 * e[1:-1] + e[:-2]) / dt ** 2
        first = max(first, float(np.max(np.abs(d1))))
        second = max(second, float(np.max(np.abs(d2))))
    return first, second


def export_schedule_csv(schedule: ShuttleSchedule, model: HyperfineModel, path: Path) -> Path:
    """导出 t_ns,E_MV_per_m,A_MHz 三列, 便于作图"""
    t, e = schedule.samples
    a = hyperfine_at(model, e)
    rows = zip(t.tolist(), e.tolist(), np.atleast_1d(a).tolist())
    path = write_result_csv(path, asdict(schedule), ("t_ns", "E_MV_per_m", "A_MHz"), rows, "schedule")
    logger.info(f"✅ 时间表已导出: {path}")
    return path


__all__ = [
    "SHIFT_KINDS", "GRID_TOLERANCE", "grid_steps", "smootherstep", "smootherstep_derivative", "Segment",
    "ShuttleSchedule", "build_schedule", "ShiftSpec", "ShiftedSchedule", "apply_shift",
    "derivative_report", "export_schedule_csv",
]
