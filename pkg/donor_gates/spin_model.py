"""
自旋模型: 物理常数、偶极耦合估算、超精细 A(E) 模型、电子-核自旋哈密顿量

单位约定:
- 时间 ns, 角频率 rad/ns
- 磁场 B: mT, 电场 E: MV/m
- 超精细 A: MHz (进入哈密顿量前乘 2π×10⁻³ 转为 rad/ns)

基矢顺序 (电子在前): ↑⇑, ↑⇓, ↓⇑, ↓⇓
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import constants as sc
from scipy.interpolate import PchipInterpolator

from .utils import ConfigError, DegenerateSpectrumError, DomainError

logger = logging.getLogger(__name__)

# MHz → rad/ns
MHZ_TO_RAD_PER_NS = 2.0 * math.pi * 1e-3
# rad/(s·T) → rad/(ns·mT)
SI_GYRO_TO_INTERNAL = 1e-12

G_FACTOR_ELECTRON = 2.0
# ³¹P 旋磁比, rad/(s·T)
GYRO_PHOSPHORUS_SI = 1.08294e8

# 硅晶格常数 a₀, 施主深度以它为单位
LATTICE_CONSTANT_NM = 0.54

TABLE_HEADER = ("E_MV_per_m", "A_MHz")


# ============================================
# 常数
# ============================================
@dataclass(frozen=True)
class Constants:
    """旋磁比 (内部单位 rad/(ns·mT)) 与 SI 常数"""

    gyro_electron: float = G_FACTOR_ELECTRON * sc.physical_constants["Bohr magneton"][0] / sc.hbar \
        * SI_GYRO_TO_INTERNAL
    gyro_phosphorus: float = GYRO_PHOSPHORUS_SI * SI_GYRO_TO_INTERNAL
    mu0: float = sc.mu_0
    hbar: float = sc.hbar
    planck: float = sc.h


DEFAULT_CONSTANTS = Constants()


# ============================================
# 偶极耦合
# ============================================
@dataclass(frozen=True)
class DipolarPair:
    """
    一对自旋的偶极耦合, 取向按最坏情况处理

    Attributes:
        gyro_1, gyro_2: 旋磁比, rad/(ns·mT)
        r: 间距, nm
    """

    gyro_1: float
    gyro_2: float
    r: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 0):
            raise DomainError(f"间距必须为正: r = {self.r} nm")


def dipolar_max_strength(pair: DipolarPair, constants: Constants = DEFAULT_CONSTANTS) -> float:
    """
    偶极耦合系数在所有取向上的最大值, 以普通频率 (Hz) 表示

    μ0 γ1 γ2 ħ² / (4π r³) · |1 - 3cos²θ|, 角度因子最大为 2, 能量除以 h 得到频率
    """
    gyro_1 = pair.gyro_1 / SI_GYRO_TO_INTERNAL
    gyro_2 = pair.gyro_2 / SI_GYRO_TO_INTERNAL
    r_m = pair.r * 1e-9
    energy = constants.mu0 * abs(gyro_1 * gyro_2) * constants.hbar ** 2 / (4 * math.pi * r_m ** 3)
    return 2.0 * energy / constants.planck


def dipolar_table(r: float = 1.0, constants: Constants = DEFAULT_CONSTANTS) -> Tuple[Tuple[str, float], ...]:
    """电子-电子、电子-核、核-核 三种组合在间距 r (nm) 处的最大耦合 (Hz)"""
    ge, gp = constants.gyro_electron, constants.gyro_phosphorus
    return (
        ("electron-electron", dipolar_max_strength(DipolarPair(ge, ge, r), constants)),
        ("electron-nucleus", dipolar_max_strength(DipolarPair(ge, gp, r), constants)),
        ("nucleus-nucleus", dipolar_max_strength(DipolarPair(gp, gp, r), constants)),
    )


# ============================================
# 超精细 A(E) 模型
# ============================================
@dataclass(frozen=True)
class HyperfineModel:
    """
    超精细耦合随电场变化的模型

    analytic: A(E) = A_max · max(0, 1 - κ(E - E_rop)²) · w(u), u = (E - knee)/knee_width,
              w(u) = exp(-u³) (u > 0) 否则 1; 电离拐点以上平滑压到 ~0, 在拐点处二阶光滑
    table:    PCHIP 插值, 不外推

    默认参数为合成值, 不对应任何具体计算结果
    """

    kind: str = "analytic"
    a_max_mhz: float = 117.0
    e_rop: float = 2.0
    kappa: float = 0.02
    knee: float = 3.0
    knee_width: float = 1.0
    e_min: float = -5.0
    e_max: float = 10.0
    table_e: Tuple[float, ...] = ()
    table_a: Tuple[float, ...] = ()
    depth_a0: Optional[float] = None
    label: str = "synthetic"

    def __post_init__(self):
        if self.kind == "analytic":
            values = (self.a_max_mhz, self.e_rop, self.kappa, self.knee, self.knee_width,
                      self.e_min, self.e_max)
            if not all(math.isfinite(v) for v in values):
                raise ConfigError(f"超精细模型参数含非有限值: {values}")
            if self.a_max_mhz < 0 or self.kappa < 0 or self.knee_width <= 0:
                raise ConfigError("要求 A_max ≥ 0, κ ≥ 0, knee_width > 0")
            if not self.e_min <= self.e_rop <= self.e_max:
                raise ConfigError(f"E_rop = {self.e_rop} 不在定义域 [{self.e_min}, {self.e_max}] 内")
            if self.knee < self.e_rop:
                raise ConfigError(f"电离拐点 knee = {self.knee} 必须不小于 E_rop = {self.e_rop}")
        elif self.kind == "table":
            e = np.asarray(self.table_e, dtype=float)
            a = np.asarray(self.table_a, dtype=float)
            if e.size < 2 or e.size != a.size:
                raise ConfigError("超精细表格至少需要两行, 且 E 与 A 等长")
            if not (np.all(np.isfinite(e)) and np.all(np.isfinite(a))):
                raise ConfigError("超精细表格含非有限值")
            if np.any(np.diff(e) <= 0):
                raise ConfigError("超精细表格的 E 必须严格递增")
            if np.any(a < 0):
                raise ConfigError("超精细表格的 A 不能为负")
        else:
            raise ConfigError(f"未知超精细模型类型: {self.kind}")

    @classmethod
    def from_table(cls, e_values: Sequence[float], a_values: Sequence[float], **meta) -> "HyperfineModel":
        e = tuple(float(v) for v in e_values)
        return cls(kind="table", table_e=e, table_a=tuple(float(v) for v in a_values),
                   e_min=e[0] if e else 0.0, e_max=e[-1] if e else 0.0, **meta)

    @cached_property
    def _interpolator(self) -> PchipInterpolator:
        return PchipInterpolator(np.asarray(self.table_e), np.asarray(self.table_a), extrapolate=False)

    @property
    def domain(self) -> Tuple[float, float]:
        return self.e_min, self.e_max

    @property
    def depth_nm(self) -> Optional[float]:
        """施主深度, nm; 未指定时为 None"""
        if self.depth_a0 is None:
            return None
        return self.depth_a0 * LATTICE_CONSTANT_NM

    @property
    def rop_field(self) -> float:
        """A(E) 取最大值的电场 (ROP)"""
        if self.kind == "analytic":
            return self.e_rop
        return self.table_e[int(np.argmax(self.table_a))]

    @property
    def peak(self) -> float:
        return float(hyperfine_at(self, self.rop_field))


def _knee_weight(u: np.ndarray) -> np.ndarray:
    positive = np.clip(u, 0.0, None)
    return np.exp(-positive ** 3)


def hyperfine_at(model: HyperfineModel, e_field):
    """
    A(E), 单位 MHz; 接受标量或数组

    Raises:
        DomainError: E 超出模型定义域 (不外推)
    """
    e = np.asarray(e_field, dtype=float)
    if np.any(~np.isfinite(e)) or np.any(e < model.e_min) or np.any(e > model.e_max):
        bad = e[(~np.isfinite(e)) | (e < model.e_min) | (e > model.e_max)].ravel()
        raise DomainError(
            f"E = {bad[0]!r} MV/m 超出超精细模型定义域 [{model.e_min}, {model.e_max}]")

    if model.kind == "analytic":
        quad = np.maximum(0.0, 1.0 - model.kappa * (e - model.e_rop) ** 2)
        a = model.a_max_mhz * quad * _knee_weight((e - model.knee) / model.knee_width)
    else:
        a = np.maximum(model._interpolator(e), 0.0)

    if np.ndim(a) == 0:
        return float(a)
    return a


def load_hyperfine_table(path: Path, **meta) -> HyperfineModel:
    """
    读取超精细表格 CSV

    格式: UTF-8, 表头恰为 E_MV_per_m,A_MHz, E 严格递增

    Raises:
        ConfigError: 文件缺失、表头不符或数值非法
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"超精细表格不存在: {path}")

    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows or tuple(cell.strip() for cell in rows[0]) != TABLE_HEADER:
        raise ConfigError(f"超精细表格表头必须为 {','.join(TABLE_HEADER)}: {path}")

    e_values, a_values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise ConfigError(f"{path}:{lineno} 应为两列, 实际 {len(row)} 列")
        try:
            e_values.append(float(row[0]))
            a_values.append(float(row[1]))
        except ValueError as e:
            raise ConfigError(f"{path}:{lineno} 数值解析失败: {e}") from e

    model = HyperfineModel.from_table(e_values, a_values, label=meta.pop("label", path.stem), **meta)
    logger.debug(f"超精细表格已载入: {path} ({len(e_values)} 行, E ∈ {model.domain})")
    return model


# ============================================
# 哈密顿量
# ============================================
@dataclass(frozen=True)
class SpinPairParams:
    """单个施主的电子-核自旋对"""

    b_field_mt: float
    hyperfine: HyperfineModel = field(default_factory=HyperfineModel)
    constants: Constants = DEFAULT_CONSTANTS

    def __post_init__(self):
        if not (math.isfinite(self.b_field_mt) and self.b_field_mt >= 0):
            raise ConfigError(f"磁场必须非负: B = {self.b_field_mt} mT")

    @property
    def electron_zeeman(self) -> float:
        return self.constants.gyro_electron * self.b_field_mt

    @property
    def nuclear_zeeman(self) -> float:
        return self.constants.gyro_phosphorus * self.b_field_mt


def hamiltonian_batch(params: SpinPairParams, a_mhz) -> np.ndarray:
    """
    B(γ_S S^z - γ_P I^z) + A S·I 的批量构造

    Args:
        a_mhz: 形状 (N,) 的超精细值 (MHz)

    Returns:
        np.ndarray: (N, 4, 4) 实对称矩阵, rad/ns
    """
    a = np.asarray(a_mhz, dtype=float).reshape(-1) * MHZ_TO_RAD_PER_NS
    ws, wp = params.electron_zeeman, params.nuclear_zeeman
    h = np.zeros((a.size, 4, 4))
    h[:, 0, 0] = (ws - wp) / 2 + a / 4
    h[:, 1, 1] = (ws + wp) / 2 - a / 4
    h[:, 2, 2] = -(ws + wp) / 2 - a / 4
    h[:, 3, 3] = -(ws - wp) / 2 + a / 4
    h[:, 1, 2] = a / 2
    h[:, 2, 1] = a / 2
    return h


def hamiltonian(params: SpinPairParams, a_mhz: float) -> np.ndarray:
    """单点哈密顿量, 4×4, rad/ns"""
    if a_mhz < 0:
        raise DomainError(f"超精细耦合不能为负: A = {a_mhz} MHz")
    return hamiltonian_batch(params, [a_mhz])[0]


class SpinEigensystem(NamedTuple):
    """
    按 A=0 标签 (↑⇑, ↑⇓, ↓⇑, ↓⇓) 绝热延续排列的本征系统

    vectors 的第 k 列为第 k 个标签对应的本征矢
    """

    energies: np.ndarray
    gap: float
    mixing_angle: float
    vectors: np.ndarray


def eigensystem(params: SpinPairParams, a_mhz: float) -> SpinEigensystem:
    """
    解析对角化: flip-flop 子块 -A/4 + (Δ0/2)σz + (A/2)σx, Δ0 = (γ_S + γ_P)B

    Raises:
        DegenerateSpectrumError: B = 0 且 A = 0 时子块简并, 标签无法定义
    """
    if a_mhz < 0:
        raise DomainError(f"超精细耦合不能为负: A = {a_mhz} MHz")
    a = a_mhz * MHZ_TO_RAD_PER_NS
    ws, wp = params.electron_zeeman, params.nuclear_zeeman
    delta0 = ws + wp
    if delta0 == 0.0 and a == 0.0:
        raise DegenerateSpectrumError("B = 0 且 A = 0: flip-flop 子块简并")

    gap = math.hypot(delta0, a)
    theta = 0.5 * math.atan2(a, delta0)
    energies = np.array([
        (ws - wp) / 2 + a / 4,
        -a / 4 + gap / 2,
        -a / 4 - gap / 2,
        -(ws - wp) / 2 + a / 4,
    ])
    vectors = np.eye(4)
    cos, sin = math.cos(theta), math.sin(theta)
    vectors[1:3, 1:3] = [[cos, -sin], [sin, cos]]
    return SpinEigensystem(energies, gap, theta, vectors)


def cz_rate(params: SpinPairParams, a_mhz: float) -> float:
    """
    条件相位累积速率 ω_zz = E(↑⇑) - E(↑⇓) - E(↓⇑) + E(↓⇓), rad/ns

    塞曼项在组合中抵消, 子块本征值之和等于迹, 因此 ω_zz 恰为 2π·A
    """
    e = eigensystem(params, a_mhz).energies
    return float(e[0] - e[1] - e[2] + e[3])


def dwell_phases(params: SpinPairParams, a_mhz: float, tau: float) -> Tuple[float, float, float]:
    """
    在固定 A 停留 tau (ns) 在本征基中累积的 (d, e, f)

    d: ancilla (电子) 相位, e: data (核) 相位, f: 条件相位; 未折叠
    """
    e = eigensystem(params, a_mhz).energies
    d = -(e[2] - e[0]) * tau
    e_phase = -(e[1] - e[0]) * tau
    f = -(e[0] - e[1] - e[2] + e[3]) * tau
    return float(d), float(e_phase), float(f)


def electron_idle_phases(params: SpinPairParams, duration: float) -> np.ndarray:
    """空闲电子 (无核耦合) 在塞曼场中的演化对角元 diag(e^{-iγBt/2}, e^{+iγBt/2})"""
    half = 0.5 * params.electron_zeeman * duration
    return np.array([np.exp(-1j * half), np.exp(1j * half)])


__all__ = [
    "MHZ_TO_RAD_PER_NS", "LATTICE_CONSTANT_NM", "TABLE_HEADER",
    "Constants", "DEFAULT_CONSTANTS", "DipolarPair", "dipolar_max_strength", "dipolar_table",
    "HyperfineModel", "hyperfine_at", "load_hyperfine_table",
    "SpinPairParams", "hamiltonian", "hamiltonian_batch",
    "SpinEigensystem", "eigensystem", "cz_rate", "dwell_phases", "electron_idle_phases",
]
