"""
时间演化: 沿电场时间表传播自旋哈密顿量

积分器: 中点规则 + 每步精确厄米指数 (批量 eigh), 步进矩阵以二叉树归约成有序乘积
恒定电场的停留段一次精确传播
"""

import logging
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .control import Segment, ShiftedSchedule, ShuttleSchedule, apply_shift, build_schedule, grid_steps
from .gate_algebra import CycleParams, DiagonalGate, extract_zzc, wrap_phase
from .spin_model import SpinPairParams, dwell_phases, eigensystem, hamiltonian_batch, hyperfine_at
from .utils import LeakageError, NumericalError

logger = logging.getLogger(__name__)

DEFAULT_DT = 5e-5  # ns
CHUNK_STEPS = 16384
LEAKAGE_LIMIT = 0.5
UNITARITY_LIMIT = 1e-9

Timeline = Union[ShuttleSchedule, ShiftedSchedule]


class Propagation(NamedTuple):
    unitary: np.ndarray
    step_count: int
    max_unitarity_defect: float


class CycleRun(NamedTuple):
    """一次绝热循环的结果: 传播子、提取出的相位、端点本征基中的 flip-flop 泄漏"""

    propagation: Propagation
    cycle: CycleParams
    leakage: float


# ============================================
# 底层: 步进矩阵与有序乘积
# ============================================
def step_unitaries(h_batch: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i H dt) 的批量计算, H 为 (N, d, d) 实对称或厄米矩阵"""
    w, v = np.linalg.eigh(h_batch)
    phases = np.exp(-1j * w * dt)
    return np.einsum("nij,nj,nkj->nik", v, phases, v.conj())


def ordered_product(unitaries: np.ndarray) -> np.ndarray:
    """U_N ⋯ U_2 U_1 (数组中靠前的先作用), 二叉树归约"""
    us = np.asarray(unitaries)
    if us.shape[0] == 0:
        raise ValueError("空的步进序列")
    while us.shape[0] > 1:
        tail = None
        if us.shape[0] % 2:
            tail, us = us[-1:], us[:-1]
        us = np.matmul(us[1::2], us[0::2])
        if tail is not None:
            us = np.concatenate([us, tail])
    return us[0]


def constant_unitary(h: np.ndarray, duration: float) -> np.ndarray:
    """恒定哈密顿量的精确传播子"""
    return step_unitaries(np.asarray(h)[None], duration)[0]


def unitarity_defect(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


# ============================================
# 传播
# ============================================
def _as_timeline(timeline: Timeline) -> ShiftedSchedule:
    if isinstance(timeline, ShuttleSchedule):
        return apply_shift(timeline, None)
    return timeline


def _segment_unitary(params: SpinPairParams, timeline: ShiftedSchedule, seg: Segment,
                     dt: float) -> Tuple[np.ndarray, int]:
    model = params.hyperfine
    if seg.kind == "hold":
        e_field = timeline.field_at(0.5 * (seg.t_start + seg.t_end))
        h = hamiltonian_batch(params, [hyperfine_at(model, e_field)])[0]
        return constant_unitary(h, seg.duration), 1

    n = grid_steps(seg.duration, dt, "渐变段")
    u = np.eye(4, dtype=complex)
    for start in range(0, n, CHUNK_STEPS):
        k = np.arange(start, min(n, start + CHUNK_STEPS))
        t_mid = seg.t_start + (k + 0.5) * dt
        h = hamiltonian_batch(params, hyperfine_at(model, timeline.field_at(t_mid)))
        if not np.all(np.isfinite(h)):
            raise NumericalError(f"哈密顿量出现非有限值 (t ∈ [{t_mid[0]}, {t_mid[-1]}] ns)")
        u = ordered_product(step_unitaries(h, dt)) @ u
    return u, n


def propagate_segments(params: SpinPairParams, timeline: Timeline, segments: Sequence[Segment],
                       dt: Optional[float] = None) -> Propagation:
    timeline = _as_timeline(timeline)
    dt = timeline.dt if dt is None else dt
    unitary = np.eye(4, dtype=complex)
    steps = 0
    for seg in segments:
        if seg.duration <= 0:
            continue
        u, n = _segment_unitary(params, timeline, seg, dt)
        unitary = u @ unitary
        steps += n

    defect = unitarity_defect(unitary)
    if defect > UNITARITY_LIMIT:
        raise NumericalError(f"传播子幺正性偏差过大: {defect:.3e}")
    return Propagation(unitary, steps, defect)


def propagate(params: SpinPairParams, timeline: Timeline, dt: Optional[float] = None) -> Propagation:
    """
    沿整条时间线传播

    Args:
        params: 自旋对参数
        timeline: 名义时间表或叠加了偏移的时间线
        dt: 渐变段步长, 默认取时间表的 dt; 必须整除每个渐变段

    Returns:
        Propagation: U = U_N ⋯ U_1 及幺正性偏差

    Raises:
        ConfigError: dt 与渐变段不可公度
        NumericalError: 哈密顿量含非有限值或幺正性偏差超限
    """
    timeline = _as_timeline(timeline)
    return propagate_segments(params, timeline, timeline.segments(), dt)


# ============================================
# 绝热循环
# ============================================
def _endpoint_basis(params: SpinPairParams, timeline: ShiftedSchedule, t: float) -> np.ndarray:
    a = hyperfine_at(params.hyperfine, timeline.field_at(t))
    return eigensystem(params, a).vectors


def _basis_pair(endpoint_basis) -> Tuple[np.ndarray, np.ndarray]:
    if endpoint_basis is None:
        return np.eye(4), np.eye(4)
    if isinstance(endpoint_basis, (tuple, list)):
        return np.asarray(endpoint_basis[0]), np.asarray(endpoint_basis[1])
    basis = np.asarray(endpoint_basis)
    return basis, basis


def flip_flop_probability(propagation: Union[Propagation, np.ndarray], endpoint_basis=None) -> float:
    """
    flip-flop 跃迁 (↑⇓ ↔ ↓⇑) 的最坏情况 Born 概率

    Args:
        propagation: 传播结果或 4×4 矩阵
        endpoint_basis: 端点本征基; 单个矩阵 (两端相同) 或 (初始基, 末端基), 默认计算基
    """
    u = propagation.unitary if isinstance(propagation, Propagation) else np.asarray(propagation)
    v_in, v_out = _basis_pair(endpoint_basis)
    rotated = v_out.conj().T @ u @ v_in
    return float(max(abs(rotated[2, 1]) ** 2, abs(rotated[1, 2]) ** 2))


def leakage_probability(u: np.ndarray) -> float:
    """任一基矢离开自身的最大概率 (行非对角质量)"""
    mass = np.abs(u) ** 2
    return float(np.max(mass.sum(axis=1) - np.diag(mass)))


def adiabatic_cycle(params: SpinPairParams, timeline: Timeline, dt: Optional[float] = None) -> CycleRun:
    """
    传播完整的 渐入 → 停留 → 渐出, 并在端点本征基中提取循环相位

    停留相位 (d, e, f) 取自停留电场处的本征能量, 渡越相位 (a, b, c) = 总相位 - 停留相位

    Raises:
        LeakageError: flip-flop 泄漏超过 0.5, 相位提取失去意义
    """
    timeline = _as_timeline(timeline)
    propagation = propagate(params, timeline, dt)
    v_in = _endpoint_basis(params, timeline, 0.0)
    v_out = _endpoint_basis(params, timeline, timeline.t_total)
    rotated = v_out.conj().T @ propagation.unitary @ v_in

    leakage = leakage_probability(rotated)
    if leakage > LEAKAGE_LIMIT:
        raise LeakageError(f"绝热循环泄漏 {leakage:.3f} 超过 {LEAKAGE_LIMIT}")

    total = extract_zzc(DiagonalGate(2, tuple(np.angle(np.diag(rotated)).tolist())))
    dwell = np.zeros(3)
    for seg in timeline.segments():
        if seg.kind == "hold":
            e_field = timeline.field_at(0.5 * (seg.t_start + seg.t_end))
            dwell += dwell_phases(params, hyperfine_at(params.hyperfine, e_field), seg.duration)

    transit = wrap_phase(np.asarray(total) - dwell)
    dwell = wrap_phase(dwell)
    cycle = CycleParams(*transit.tolist(), *dwell.tolist(), tau=timeline.schedule.tau)
    logger.debug(f"循环完成: τ = {cycle.tau:.6f} ns, c = {cycle.c:+.3e}, "
                 f"f = {cycle.f:+.6f}, 泄漏 = {leakage:.2e}")
    return CycleRun(propagation, cycle, leakage)


def ramp_flip_flop_probability(params: SpinPairParams, schedule: ShuttleSchedule,
                               dt: Optional[float] = None) -> float:
    """
    单程渐入 (E_start → E_rop) 的 flip-flop 概率, 端点分别取各自的本征基

    完整循环的两次渐变会互相干涉, 使概率随穿梭时间振荡; 单程概率随时间单调衰减
    """
    timeline = _as_timeline(schedule)
    ramp_in = timeline.segments()[0]
    propagation = propagate_segments(params, timeline, [ramp_in], dt)
    basis = (_endpoint_basis(params, timeline, ramp_in.t_start),
             _endpoint_basis(params, timeline, ramp_in.t_end))
    return flip_flop_probability(propagation, basis)


def ramp_schedule(e_start: float, e_rop: float, t_ramp: float, dt: Optional[float] = None) -> ShuttleSchedule:
    """零停留时间表, 步长默认取 T_ramp 的整数分之一且不大于 DEFAULT_DT"""
    if dt is None:
        dt = t_ramp / max(1, int(np.ceil(t_ramp / DEFAULT_DT - 1e-9)))
    return build_schedule(e_start, e_rop, t_ramp, 0.0, dt)


__all__ = [
    "DEFAULT_DT", "CHUNK_STEPS", "LEAKAGE_LIMIT", "UNITARITY_LIMIT",
    "Propagation", "CycleRun", "step_unitaries", "ordered_product", "constant_unitary",
    "unitarity_defect", "propagate", "propagate_segments", "flip_flop_probability",
    "leakage_probability", "adiabatic_cycle", "ramp_flip_flop_probability", "ramp_schedule",
]
