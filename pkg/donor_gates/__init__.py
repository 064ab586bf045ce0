"""
donor_gates: 施主自旋绝热 + 动力学解耦 CZ 门仿真
"""

# 1. 统一导入核心模块
from .utils import __version__, DonorGateError, ConfigError, DomainError, NumericalError, LeakageError
from .gate_algebra import DiagonalGate, CycleParams, build_zzc, extract_zzc, composite_ideal
from .spin_model import HyperfineModel, SpinPairParams, hyperfine_at, eigensystem, cz_rate
from .control import ShuttleSchedule, ShiftSpec, build_schedule, apply_shift
from .dynamics import propagate, adiabatic_cycle, flip_flop_probability
from .protocol import calibrate_tau, double_cycle_run, composite_run
from .analysis import channel_decompose, sweep_shuttle_time, sweep_shift

# 2. 统一注册命令类 (命令行子命令名 -> 命令类)
from .cli import COMMAND_CLASS_MAPPINGS

# 3. 统一注册显示名称
from .cli import COMMAND_DISPLAY_NAME_MAPPINGS

# 4. 导出
__all__ = [
    "__version__", "COMMAND_CLASS_MAPPINGS", "COMMAND_DISPLAY_NAME_MAPPINGS",
    "DonorGateError", "ConfigError", "DomainError", "NumericalError", "LeakageError",
    "DiagonalGate", "CycleParams", "build_zzc", "extract_zzc", "composite_ideal",
    "HyperfineModel", "SpinPairParams", "hyperfine_at", "eigensystem", "cz_rate",
    "ShuttleSchedule", "ShiftSpec", "build_schedule", "apply_shift",
    "propagate", "adiabatic_cycle", "flip_flop_probability",
    "calibrate_tau", "double_cycle_run", "composite_run",
    "channel_decompose", "sweep_shuttle_time", "sweep_shift",
]
