"""
门代数: 对角多比特门的精确相位记账 + 极简纯态线路模拟器

约定 (全工具箱统一):
- Z_θ = diag(1, e^{iθ}), CZ_φ = diag(1, 1, 1, e^{iφ})
- 第 0 条线 = 线路图最上方一条 (双比特时为 ancilla, 即电子), 基矢按字典序
- 全局相位一律丢弃: 规范形式 phases[0] = 0, 其余相位落在 (-π, π]
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

TWO_PI = 2.0 * math.pi


# ============================================
# 相位工具
# ============================================
def wrap_phase(phase):
    """把相位折叠到 (-π, π]; 标量返回 float, 数组返回 ndarray"""
    wrapped = math.pi - np.mod(math.pi - np.asarray(phase, dtype=float), TWO_PI)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def phase_distance(x: float, y: float) -> float:
    """两个相位在模 2π 意义下的距离, 取值 [0, π]"""
    return abs(wrap_phase(x - y))


def unitary_distance(u: np.ndarray, v: np.ndarray) -> float:
    """忽略全局相位后两个矩阵的最大逐元素偏差"""
    overlap = np.vdot(v, u)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.max(np.abs(u - phase * v)))


# ============================================
# 对角门
# ============================================
@dataclass(frozen=True)
class DiagonalGate:
    """
    n 比特对角酉门, 以计算基上的相位表示 (字典序)

    Attributes:
        num_qubits: 比特数
        phases: 2^n 个相位 (弧度)
    """

    num_qubits: int
    phases: Tuple[float, ...]

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValueError(f"num_qubits 必须为正: {self.num_qubits}")
        if len(self.phases) != 2 ** self.num_qubits:
            raise ValueError(
                f"相位个数 {len(self.phases)} 与 2^{self.num_qubits} 不符")
        if not all(math.isfinite(p) for p in self.phases):
            raise ValueError("相位必须为有限值")

    @classmethod
    def from_phases(cls, phases: Sequence[float]) -> "DiagonalGate":
        num_qubits = int(round(math.log2(len(phases)))) if len(phases) > 1 else 0
        return cls(num_qubits, tuple(float(p) for p in phases))

    @classmethod
    def identity(cls, num_qubits: int) -> "DiagonalGate":
        return cls(num_qubits, (0.0,) * (2 ** num_qubits))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.phases, dtype=float)

    def matrix(self) -> np.ndarray:
        return np.diag(np.exp(1j * self.as_array()))

    def is_close(self, other: "DiagonalGate", atol: float = 1e-12) -> bool:
        """模 2π 且忽略全局相位的比较"""
        if other.num_qubits != self.num_qubits:
            return False
        diff = canonicalize(self).as_array() - canonicalize(other).as_array()
        return bool(np.all(np.abs(wrap_phase(diff)) <= atol))


def canonicalize(g: DiagonalGate) -> DiagonalGate:
    """去掉全局相位 (phases[0] = 0) 并把相位折叠到 (-π, π]"""
    phases = g.as_array()
    return DiagonalGate(g.num_qubits, tuple(wrap_phase(phases - phases[0]).tolist()))


def compose(g1: DiagonalGate, g2: DiagonalGate) -> DiagonalGate:
    """对角门相乘 = 相位逐项相加 (可交换)"""
    if g1.num_qubits != g2.num_qubits:
        raise ValueError(f"比特数不一致: {g1.num_qubits} vs {g2.num_qubits}")
    return canonicalize(DiagonalGate(g1.num_qubits,
                                     tuple((g1.as_array() + g2.as_array()).tolist())))


def _qubit_bit(num_qubits: int, qubit: int) -> int:
    if not 0 <= qubit < num_qubits:
        raise IndexError(f"比特下标 {qubit} 超出范围 [0, {num_qubits})")
    return 1 << (num_qubits - 1 - qubit)


def x_conjugate_mask(g: DiagonalGate, mask: int) -> DiagonalGate:
    """X_mask · g · X_mask: 按掩码翻转基矢下标"""
    if mask == 0:
        return canonicalize(g)
    index = np.arange(2 ** g.num_qubits) ^ mask
    return canonicalize(DiagonalGate(g.num_qubits, tuple(g.as_array()[index].tolist())))


def x_conjugate(g: DiagonalGate, qubit: int) -> DiagonalGate:
    """X_q · g · X_q, 仍为对角门"""
    return x_conjugate_mask(g, _qubit_bit(g.num_qubits, qubit))


def single_qubit_z(theta: float, qubit: int, num_qubits: int) -> DiagonalGate:
    bit = _qubit_bit(num_qubits, qubit)
    index = np.arange(2 ** num_qubits)
    return canonicalize(DiagonalGate(num_qubits,
                                     tuple((theta * ((index & bit) > 0)).tolist())))


def controlled_phase(phi: float, qubit_1: int, qubit_2: int, num_qubits: int) -> DiagonalGate:
    bits = _qubit_bit(num_qubits, qubit_1) | _qubit_bit(num_qubits, qubit_2)
    index = np.arange(2 ** num_qubits)
    return canonicalize(DiagonalGate(num_qubits,
                                     tuple((phi * ((index & bits) == bits)).tolist())))


# ============================================
# 双比特分解 Z_a ⊗ Z_b · CZ_c
# ============================================
def build_zzc(a: float, b: float, c: float) -> DiagonalGate:
    """Z_a (ancilla) ⊗ Z_b (data) · CZ_c"""
    return canonicalize(DiagonalGate(2, (0.0, b, a, a + b + c)))


def extract_zzc(g: DiagonalGate) -> Tuple[float, float, float]:
    """
    把双比特对角门唯一分解为 Z_a ⊗ Z_b · CZ_c

    Returns:
        (a, b, c): 均落在 (-π, π]
    """
    if g.num_qubits != 2:
        raise ValueError(f"extract_zzc 只接受双比特门, 收到 {g.num_qubits} 比特")
    p = canonicalize(g).phases
    return p[2], p[1], wrap_phase(p[3] - p[1] - p[2])


def symmetric_form(alpha: float, beta: float, gamma: float) -> DiagonalGate:
    """
    文献里的对称写法 diag(e^{iα}, e^{iβ}, e^{iγ}, e^{-i(α+β+γ)})

    去掉全局相位 α 后对应本约定的
    a = γ - α, b = β - α, c = -2(β + γ)
    """
    return canonicalize(DiagonalGate(2, (alpha, beta, gamma, -(alpha + beta + gamma))))


# ============================================
# 相位多项式 (n 比特的单比特相位与条件相位)
# ============================================
def phase_polynomial(g: DiagonalGate) -> Dict[Tuple[int, ...], float]:
    """
    φ(x) = Σ_S θ_S Π_{i∈S} x_i 的系数 θ_S (Möbius 变换), 不含空集

    双比特时 θ_(0,) = a, θ_(1,) = b, θ_(0,1) = c, 与 extract_zzc 一致
    """
    n = g.num_qubits
    coeff = canonicalize(g).as_array().copy()
    for q in range(n):
        bit = 1 << (n - 1 - q)
        for index in range(2 ** n):
            if index & bit:
                coeff[index] -= coeff[index ^ bit]
    terms = {}
    for index in range(1, 2 ** n):
        subset = tuple(q for q in range(n) if index & (1 << (n - 1 - q)))
        terms[subset] = wrap_phase(coeff[index])
    return terms


def from_phase_polynomial(num_qubits: int, terms: Dict[Tuple[int, ...], float]) -> DiagonalGate:
    index = np.arange(2 ** num_qubits)
    phases = np.zeros(2 ** num_qubits)
    for subset, theta in terms.items():
        bits = sum(_qubit_bit(num_qubits, q) for q in subset)
        phases += theta * ((index & bits) == bits)
    return canonicalize(DiagonalGate(num_qubits, tuple(phases.tolist())))


def embed_diagonal(g: DiagonalGate, targets: Sequence[int], num_qubits: int) -> DiagonalGate:
    """把 k 比特对角门放到 n 比特寄存器的 targets 线上"""
    if len(targets) != g.num_qubits:
        raise ValueError("targets 个数与门的比特数不符")
    index = np.arange(2 ** num_qubits)
    local = np.zeros_like(index)
    for q in targets:
        local = (local << 1) | ((index & _qubit_bit(num_qubits, q)) > 0)
    return canonicalize(DiagonalGate(num_qubits, tuple(g.as_array()[local].tolist())))


def embed_operator(u: np.ndarray, targets: Sequence[int], num_qubits: int) -> np.ndarray:
    """把 k 比特稠密矩阵放到 n 比特寄存器的 targets 线上 (其余为单位阵)"""
    k = len(targets)
    u_tensor = np.asarray(u, dtype=complex).reshape([2] * (2 * k))
    full = np.eye(2 ** num_qubits, dtype=complex).reshape([2] * (2 * num_qubits))
    full = np.tensordot(u_tensor, full, axes=(list(range(k, 2 * k)), list(targets)))
    full = np.moveaxis(full, list(range(k)), list(targets))
    return full.reshape(2 ** num_qubits, 2 ** num_qubits)


def x_string_matrix(mask: int, num_qubits: int) -> np.ndarray:
    """X_mask 的置换矩阵"""
    dim = 2 ** num_qubits
    perm = np.zeros((dim, dim), dtype=complex)
    perm[np.arange(dim) ^ mask, np.arange(dim)] = 1.0
    return perm


# ============================================
# 时序折叠: 对角门与 X 门的序列 → X_mask · D
# ============================================
XGate = Tuple[str, int]
SequenceOp = Union[DiagonalGate, XGate]


def fold_sequence(num_qubits: int, ops: Sequence[SequenceOp],
                  conjugate: Callable[[DiagonalGate, int], DiagonalGate] = x_conjugate_mask,
                  ) -> Tuple[DiagonalGate, int]:
    """
    按时间顺序 (先作用的在前) 折叠对角门与 X 门

    利用 G · X_m = X_m · (X_m G X_m) 把所有 X 推到最后

    Returns:
        (D, mask): 净操作 = X_mask · D
    """
    mask = 0
    net = DiagonalGate.identity(num_qubits)
    for op in ops:
        if isinstance(op, DiagonalGate):
            net = compose(conjugate(op, mask), net)
        else:
            name, qubit = op
            if name != "X":
                raise ValueError(f"fold_sequence 只接受对角门和 X 门, 收到 {name}")
            mask ^= _qubit_bit(num_qubits, qubit)
    return net, mask


def mask_qubits(mask: int, num_qubits: int) -> Tuple[int, ...]:
    return tuple(q for q in range(num_qubits) if mask & _qubit_bit(num_qubits, q))


# ============================================
# 绝热循环参数
# ============================================
@dataclass(frozen=True)
class CycleParams:
    """
    一次绝热循环 (渡越 → ROP 停留 τ → 渡越返回) 的六个相位

    a, b, c 为渡越相位 (对噪声敏感); d, e, f 为 ROP 停留相位; tau 单位 ns
    g = 2b + c + e 由双循环导出, 不在此存储
    """

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float
    tau: float

    def __post_init__(self):
        values = (self.a, self.b, self.c, self.d, self.e, self.f, self.tau)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"CycleParams 含非有限值: {values}")
        if self.tau < 0:
            raise ValueError(f"tau 不能为负: {self.tau}")

    @classmethod
    def from_stages(cls, first: Tuple[float, float, float], dwell: Tuple[float, float, float],
                    last: Tuple[float, float, float], tau: float) -> "CycleParams":
        """三段 (进入, 停留, 返回) 合成: a = a1 + a3, d = a2, ..."""
        return cls(a=first[0] + last[0], b=first[1] + last[1], c=first[2] + last[2],
                   d=dwell[0], e=dwell[1], f=dwell[2], tau=tau)

    @property
    def transit_gate(self) -> DiagonalGate:
        return build_zzc(self.a, self.b, self.c)

    @property
    def dwell_gate(self) -> DiagonalGate:
        return build_zzc(self.d, self.e, self.f)

    @property
    def gate(self) -> DiagonalGate:
        return compose(self.transit_gate, self.dwell_gate)


@dataclass(frozen=True)
class DoubleCycleNet:
    """ancilla 重聚焦双循环的净操作 = X_ancilla · diagonal"""

    diagonal: DiagonalGate
    ancilla_flip: bool = True

    @property
    def ancilla_phase(self) -> float:
        return extract_zzc(self.diagonal)[0]

    @property
    def data_phase(self) -> float:
        return extract_zzc(self.diagonal)[1]

    @property
    def conditional_phase(self) -> float:
        return extract_zzc(self.diagonal)[2]

    def matrix(self) -> np.ndarray:
        mask = _qubit_bit(2, 0) if self.ancilla_flip else 0
        return x_string_matrix(mask, 2) @ self.diagonal.matrix()


def double_cycle_net(cycle1: CycleParams, cycle2: CycleParams) -> DoubleCycleNet:
    """
    cycle1 → ancilla 上的 X → cycle2 的净操作

    cycle1 的 f 应校准为 π, cycle2 的停留相位为零; 结果的对角部分为
    Z_d ⊗ Z_g · CZ_π, g = 2b + c + e, 与 a 无关
    """
    net, mask = fold_sequence(2, [cycle1.gate, ("X", 0), cycle2.gate])
    return DoubleCycleNet(net, ancilla_flip=bool(mask))


@dataclass(frozen=True)
class CompositeDecomposition:
    """
    两 ancilla 复合门 (比特顺序: ancilla1, ancilla2, data)

    净操作 = X_{x_flips} · diagonal, diagonal = entangling · Π Z_{single_phases}
    """

    diagonal: DiagonalGate
    entangling: DiagonalGate
    single_phases: Tuple[float, float, float]
    x_flips: Tuple[int, ...]

    def matrix(self) -> np.ndarray:
        mask = sum(_qubit_bit(3, q) for q in self.x_flips)
        return x_string_matrix(mask, 3) @ self.diagonal.matrix()


# ancilla1, ancilla2, data
COMPOSITE_QUBITS = ("ancilla1", "ancilla2", "data")


def composite_ideal(dc1: DoubleCycleNet, dc2: DoubleCycleNet,
                    travel: Optional[DiagonalGate] = None,
                    idle_phases: Tuple[float, float] = (0.0, 0.0)) -> CompositeDecomposition:
    """
    数据重聚焦复合门: dc1 作用于 (ancilla1, data) → data 上的 X → dc2 作用于 (ancilla2, data)

    两个双循环的 g 相同时, data 上的单比特相位 g - g' 抵消, 纠缠部分恰为 CZ·CZ;
    已知修正: ancilla1 上 Z_d, ancilla2 上 Z_{d'+π}, 三条线末尾各一个 X

    Args:
        dc1, dc2: 两个双循环的净操作
        travel: 两个双循环之间 (data 翻转之前) 的三比特对角演化
        idle_phases: (ancilla1 在 dc2 期间, ancilla2 在 dc1 与 travel 期间) 的空闲 Z 相位
    """
    ops: List[SequenceOp] = [embed_diagonal(dc1.diagonal, (0, 2), 3),
                             single_qubit_z(idle_phases[1], 1, 3)]
    if dc1.ancilla_flip:
        ops.append(("X", 0))
    if travel is not None:
        ops.append(travel)
    ops.append(("X", 2))
    ops.append(embed_diagonal(dc2.diagonal, (1, 2), 3))
    ops.append(single_qubit_z(idle_phases[0], 0, 3))
    if dc2.ancilla_flip:
        ops.append(("X", 1))
    net, mask = fold_sequence(3, ops)

    terms = phase_polynomial(net)
    singles = tuple(terms.get((q,), 0.0) for q in range(3))
    entangling = from_phase_polynomial(
        3, {s: theta for s, theta in terms.items() if len(s) >= 2})
    return CompositeDecomposition(net, entangling, singles, mask_qubits(mask, 3))


# ============================================
# 纯态线路模拟
# ============================================
NORM_TOLERANCE = 1e-12

_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


@dataclass(frozen=True, eq=False)
class PureState:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2 ** self.num_qubits:
            raise ValueError(f"振幅个数 {amps.size} 与 2^{self.num_qubits} 不符")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ValueError(f"输入态未归一化: |ψ|² = {norm!r}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, num_qubits: int, index: int) -> "PureState":
        amps = np.zeros(2 ** num_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(num_qubits, amps)

    @classmethod
    def product(cls, *states: np.ndarray) -> "PureState":
        """单比特态 (或多比特振幅) 的张量积, 第一个参数在最上方"""
        amps = np.array([1.0 + 0j])
        for s in states:
            amps = np.kron(amps, np.asarray(s, dtype=complex))
        return cls(int(round(math.log2(amps.size))), amps)

    def discard(self, qubit: int) -> "PureState":
        """丢弃一个处于确定计算基态的比特 (测量之后)"""
        tensor = self.amplitudes.reshape([2] * self.num_qubits)
        zero = np.take(tensor, 0, axis=qubit).reshape(-1)
        one = np.take(tensor, 1, axis=qubit).reshape(-1)
        if np.linalg.norm(zero) > NORM_TOLERANCE and np.linalg.norm(one) > NORM_TOLERANCE:
            raise ValueError(f"比特 {qubit} 与其余比特纠缠, 不能直接丢弃")
        kept = zero if np.linalg.norm(zero) > np.linalg.norm(one) else one
        return PureState(self.num_qubits - 1, kept)


@dataclass(frozen=True)
class Op:
    """线路操作: H / X / Z(θ) / CZ(φ) / M"""

    name: str
    qubits: Tuple[int, ...]
    angle: float = math.pi


def H(q: int) -> Op:
    return Op("H", (q,))


def X(q: int) -> Op:
    return Op("X", (q,))


def Z(q: int, theta: float = math.pi) -> Op:
    return Op("Z", (q,), theta)


def CZ(q1: int, q2: int, phi: float = math.pi) -> Op:
    return Op("CZ", (q1, q2), phi)


def measure(q: int) -> Op:
    return Op("M", (q,))


@dataclass(frozen=True)
class Branch:
    """测量分支: outcomes 为按测量顺序的结果, 概率为零的分支 state 为 None"""

    outcomes: Tuple[int, ...]
    probability: float
    state: Optional[PureState]


def _apply(tensor: np.ndarray, op: Op, num_qubits: int) -> np.ndarray:
    for q in op.qubits:
        if not 0 <= q < num_qubits:
            raise IndexError(f"{op.name} 作用比特 {q} 超出范围")
    if op.name in ("H", "X"):
        matrix = _HADAMARD if op.name == "H" else _PAULI_X
        q = op.qubits[0]
        return np.moveaxis(np.tensordot(matrix, tensor, axes=(1, q)), 0, q)
    tensor = tensor.copy()
    index = [slice(None)] * num_qubits
    if op.name == "Z":
        index[op.qubits[0]] = 1
    elif op.name == "CZ":
        if op.qubits[0] == op.qubits[1]:
            raise ValueError("CZ 的两个比特不能相同")
        index[op.qubits[0]] = 1
        index[op.qubits[1]] = 1
    else:
        raise ValueError(f"未知操作: {op.name}")
    tensor[tuple(index)] *= np.exp(1j * op.angle)
    return tensor


def simulate_circuit(initial: PureState, ops: Sequence[Op]) -> List[Branch]:
    """
    精确态矢量演化; 测量不抽样, 同时返回两个分支及其 Born 概率

    Returns:
        List[Branch]: 按结果字典序排列的全部分支
    """
    n = initial.num_qubits
    branches = [(tuple(), 1.0, initial.amplitudes.reshape([2] * n))]
    for op in ops:
        updated = []
        for outcomes, prob, tensor in branches:
            if op.name != "M":
                updated.append((outcomes, prob, None if tensor is None else _apply(tensor, op, n)))
                continue
            q = op.qubits[0]
            if not 0 <= q < n:
                raise IndexError(f"测量比特 {q} 超出范围")
            for outcome in (0, 1):
                if tensor is None:
                    updated.append((outcomes + (outcome,), 0.0, None))
                    continue
                projected = np.zeros_like(tensor)
                index = [slice(None)] * n
                index[q] = outcome
                projected[tuple(index)] = tensor[tuple(index)]
                weight = float(np.sum(np.abs(projected) ** 2))
                if weight <= NORM_TOLERANCE ** 2:
                    updated.append((outcomes + (outcome,), 0.0, None))
                else:
                    updated.append((outcomes + (outcome,), prob * weight,
                                    projected / math.sqrt(weight)))
        branches = updated

    return [Branch(outcomes, prob, None if tensor is None else PureState(n, tensor.reshape(-1)))
            for outcomes, prob, tensor in branches]


# ============================================
# 普适性线路
# ============================================
def ancilla_data_cz_circuit() -> List[Op]:
    """ancilla1 (0), 处于 |0⟩ 的 ancilla2 (1), data (2): 复合门后测量并丢弃 ancilla2"""
    return [CZ(0, 2), CZ(1, 2), measure(1)]


def data_data_cz_circuit() -> List[Op]:
    """ancilla (0, 初态 |0⟩), data1 (1), data2 (2): 由 ancilla-data CZ 合成 data-data CZ"""
    return [H(0), CZ(0, 1), H(0), CZ(0, 2), H(0), CZ(0, 1), H(0), measure(0)]


def indirect_measurement_circuit() -> List[Op]:
    """ancilla (0, 初态 |0⟩), data (1): 通过 ancilla 测量 data 的 Z"""
    return [H(0), CZ(0, 1), H(0), measure(0)]


# 各分支需要补的单比特修正 (测量结果 → 修正操作); 结果 1 的分支概率恒为零
DATA_DATA_BRANCH_CORRECTIONS: Dict[int, Tuple[Op, ...]] = {0: (), 1: ()}

_KET0 = np.array([1, 0], dtype=complex)


def _random_state(rng: np.random.Generator, num_qubits: int) -> np.ndarray:
    amps = rng.normal(size=2 ** num_qubits) + 1j * rng.normal(size=2 ** num_qubits)
    return amps / np.linalg.norm(amps)


def _test_inputs(rng: np.random.Generator, num_qubits: int, n_random: int) -> List[np.ndarray]:
    inputs = [np.eye(2 ** num_qubits, dtype=complex)[k] for k in range(2 ** num_qubits)]
    plus = np.ones(2 ** num_qubits, dtype=complex) / math.sqrt(2 ** num_qubits)
    inputs.append(plus)
    inputs.extend(_random_state(rng, num_qubits) for _ in range(n_random))
    return inputs


def _state_error(expected: np.ndarray, actual: np.ndarray) -> float:
    return unitary_distance(actual.reshape(-1, 1), expected.reshape(-1, 1))


def verify_universality(rng: np.random.Generator, n_random: int = 20) -> Dict[str, float]:
    """
    普适性线路自检: 完整基 + |+…+⟩ + n_random 个随机态

    Returns:
        Dict[str, float]: 每条恒等式的最大误差
    """
    cz = controlled_phase(math.pi, 0, 1, 2).matrix()
    report = {"ancilla_data_cz": 0.0, "data_data_cz": 0.0, "indirect_measurement": 0.0}

    for psi in _test_inputs(rng, 2, n_random):
        # ancilla_data: (ancilla1, data) 中间插入 |0⟩ 的 ancilla2
        initial = PureState(3, np.einsum("ad,b->abd", psi.reshape(2, 2), _KET0).reshape(-1))
        expected = cz @ psi
        for branch in simulate_circuit(initial, ancilla_data_cz_circuit()):
            if branch.outcomes == (0,):
                err = abs(branch.probability - 1.0)
                err = max(err, _state_error(expected, branch.state.discard(1).amplitudes))
            else:
                err = branch.probability
            report["ancilla_data_cz"] = max(report["ancilla_data_cz"], err)

        # data_data: ancilla 在最上方
        initial = PureState.product(_KET0, psi)
        for branch in simulate_circuit(initial, data_data_cz_circuit()):
            if branch.state is None:
                err = branch.probability
            else:
                state = branch.state
                for op in DATA_DATA_BRANCH_CORRECTIONS[branch.outcomes[0]]:
                    state = simulate_circuit(state, [op])[0].state
                reference = np.kron(np.eye(2)[branch.outcomes[0]], cz @ psi)
                err = max(abs(branch.probability - 1.0) if branch.outcomes == (0,) else 0.0,
                          _state_error(reference, state.amplitudes))
            report["data_data_cz"] = max(report["data_data_cz"], err)

    for psi in _test_inputs(rng, 1, n_random):
        initial = PureState.product(_KET0, psi)
        direct = np.abs(psi) ** 2
        for branch in simulate_circuit(initial, indirect_measurement_circuit()):
            err = abs(branch.probability - direct[branch.outcomes[0]])
            report["indirect_measurement"] = max(report["indirect_measurement"], err)

    return report


# ============================================
# 恒等式自检 (稠密矩阵作为独立参照)
# ============================================
def _z(theta: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * theta)])


def _dense_zzc(a: float, b: float, c: float) -> np.ndarray:
    return np.kron(_z(a), _z(b)) @ np.diag([1, 1, 1, np.exp(1j * c)])


def identity_suite(rng: np.random.Generator, samples: int = 10_000,
                   conjugate: Callable[[DiagonalGate, int], DiagonalGate] = x_conjugate_mask,
                   ) -> Dict[str, float]:
    """
    随机参数下的门代数恒等式 (对角记账 vs 稠密矩阵链)

    Args:
        rng: 随机数发生器 (固定种子即可复现)
        samples: 随机参数组数
        conjugate: X 共轭的实现, 负对照时传入错误实现

    Returns:
        Dict[str, float]: 每条恒等式的最大误差
    """
    x_anc = np.kron(_PAULI_X, np.eye(2))
    report = {
        "canonicalize": 0.0,
        "compose": 0.0,
        "zzc_roundtrip": 0.0,
        "symmetric_form": 0.0,
        "cycle_composition": 0.0,
        "x_conjugate": 0.0,
        "double_cycle": 0.0,
        "double_cycle_a_independence": 0.0,
        "composite": 0.0,
        "composite_entangling": 0.0,
    }

    def record(key: str, err: float) -> None:
        report[key] = max(report[key], float(err))

    for _ in range(samples):
        a, b, c, d, e = rng.uniform(-math.pi, math.pi, size=5)
        stages = rng.uniform(-math.pi, math.pi, size=(3, 3))

        phases = rng.uniform(-10, 10, size=4)
        g = DiagonalGate(2, tuple(phases.tolist()))
        record("canonicalize", unitary_distance(canonicalize(g).matrix(), g.matrix()))

        h = DiagonalGate(2, tuple(rng.uniform(-10, 10, size=4).tolist()))
        record("compose", unitary_distance(compose(g, h).matrix(), g.matrix() @ h.matrix()))

        built = build_zzc(a, b, c)
        back = build_zzc(*extract_zzc(built))
        record("zzc_roundtrip", max(unitary_distance(back.matrix(), built.matrix()),
                                    unitary_distance(built.matrix(), _dense_zzc(a, b, c))))

        alpha, beta, gamma = stages[0]
        record("symmetric_form", unitary_distance(
            symmetric_form(alpha, beta, gamma).matrix(),
            _dense_zzc(gamma - alpha, beta - alpha, -2 * (beta + gamma))))

        cycle = CycleParams.from_stages(stages[0], stages[1], stages[2], tau=1.0)
        dense = np.eye(4, dtype=complex)
        for stage in stages:
            dense = _dense_zzc(*stage) @ dense
        record("cycle_composition", unitary_distance(cycle.gate.matrix(), dense))

        record("x_conjugate", unitary_distance(
            conjugate(g, 2).matrix(), x_anc @ g.matrix() @ x_anc))

        # ancilla 重聚焦双循环: f = π
        cycle1 = CycleParams(a, b, c, d, e, math.pi, tau=1.0)
        cycle2 = CycleParams(a, b, c, 0.0, 0.0, 0.0, tau=0.0)
        chain = _dense_zzc(a, b, c) @ x_anc @ _dense_zzc(d, e, math.pi) @ _dense_zzc(a, b, c)
        expected = x_anc @ _dense_zzc(d, 2 * b + c + e, math.pi)
        record("double_cycle", unitary_distance(chain, expected))
        net, mask = fold_sequence(2, [cycle1.gate, ("X", 0), cycle2.gate], conjugate)
        record("double_cycle", unitary_distance(x_string_matrix(mask, 2) @ net.matrix(), chain))
        shifted = fold_sequence(
            2, [CycleParams(a + 1.0, b, c, d, e, math.pi, 1.0).gate, ("X", 0),
                CycleParams(a + 1.0, b, c, 0.0, 0.0, 0.0, 0.0).gate], conjugate)[0]
        record("double_cycle_a_independence", unitary_distance(shifted.matrix(), net.matrix()))

        # 复合门: 两个双循环共享 (b, c, e), d 可不同
        d2 = rng.uniform(-math.pi, math.pi)
        dc1 = DoubleCycleNet(net)
        dc2 = double_cycle_net(CycleParams(a, b, c, d2, e, math.pi, 1.0), cycle2)
        decomposition = composite_ideal(dc1, dc2)
        x_a1 = embed_operator(_PAULI_X, (0,), 3)
        x_a2 = embed_operator(_PAULI_X, (1,), 3)
        x_d = embed_operator(_PAULI_X, (2,), 3)
        dense8 = (x_a2 @ embed_operator(_dense_zzc(d2, 2 * b + c + e, math.pi), (1, 2), 3)
                  @ x_d @ x_a1 @ embed_operator(_dense_zzc(d, 2 * b + c + e, math.pi), (0, 2), 3))
        record("composite", unitary_distance(decomposition.matrix(), dense8))
        cz_cz = (controlled_phase(math.pi, 0, 2, 3).matrix()
                 @ controlled_phase(math.pi, 1, 2, 3).matrix())
        record("composite_entangling", unitary_distance(decomposition.entangling.matrix(), cz_cz))

    return report


__all__ = [
    "TWO_PI", "wrap_phase", "phase_distance", "unitary_distance",
    "DiagonalGate", "canonicalize", "compose", "x_conjugate", "x_conjugate_mask",
    "single_qubit_z", "controlled_phase", "build_zzc", "extract_zzc", "symmetric_form",
    "phase_polynomial", "from_phase_polynomial", "embed_diagonal", "embed_operator",
    "x_string_matrix", "fold_sequence", "mask_qubits",
    "CycleParams", "DoubleCycleNet", "double_cycle_net",
    "CompositeDecomposition", "COMPOSITE_QUBITS", "composite_ideal",
    "PureState", "Op", "H", "X", "Z", "CZ", "measure", "Branch", "simulate_circuit",
    "ancilla_data_cz_circuit", "data_data_cz_circuit", "indirect_measurement_circuit",
    "DATA_DATA_BRANCH_CORRECTIONS", "verify_universality", "identity_suite",
]
