"""
命令行入口: python -m donor_gates <子命令> [--config PATH] [--out PATH] [--jobs N]

每个子命令是一个命令类 (CATEGORY / FUNCTION / INPUT_TYPES), 在 COMMAND_CLASS_MAPPINGS 中注册
退出码: 0 成功, 1 配置/校验错误, 2 数值失败
"""

import argparse
import logging
import math
import sys
import traceback
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .analysis import drift_estimates, sweep_shift, sweep_shuttle_time
from .config import load_preset, make_params, make_schedule, presets_in_category, resolve_config
from .control import export_schedule_csv
from .gate_algebra import DiagonalGate, canonicalize, identity_suite, verify_universality
from .protocol import CALIBRATION_MODES, calibrate_tau
from .spin_model import cz_rate, dipolar_table, dwell_phases, hyperfine_at
from .utils import (
    DonorGateError, NumericalError, __version__, check_dependencies, load_config,
    setup_logging, write_result_csv,
)

logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-9
UNIVERSALITY_TOLERANCE = 1e-12
RESULTS_DIR = Path("results")


# ============================================
# 公共输入定义
# ============================================
def _physics_inputs() -> Dict[str, tuple]:
    return {
        "b_field_mt": ("FLOAT", {"default": 100.0, "min": 0.0, "max": 10000.0,
                                 "tooltip": "沿 z 方向的静磁场, mT"}),
        "hyperfine_preset": ("STRING", {"default": "",
                                        "tooltip": "超精细模型预设, 格式 \"文件名 - Key名\", 留空使用下列参数"}),
        "hyperfine_table": ("STRING", {"default": "",
                                       "tooltip": "A(E) 表格 CSV 路径 (表头 E_MV_per_m,A_MHz), 非空时优先"}),
        "a_max_mhz": ("FLOAT", {"default": 117.0, "min": 0.0, "max": 1000.0, "tooltip": "ROP 处的超精细耦合, MHz"}),
        "e_rop": ("FLOAT", {"default": 2.0, "min": -100.0, "max": 100.0, "tooltip": "ROP 电场, MV/m"}),
        "kappa": ("FLOAT", {"default": 0.02, "min": 0.0, "max": 10.0, "tooltip": "二次 Stark 系数, (m/MV)²"}),
        "knee": ("FLOAT", {"default": 3.0, "min": -100.0, "max": 100.0, "tooltip": "电离拐点, MV/m"}),
        "knee_width": ("FLOAT", {"default": 1.0, "min": 1e-6, "max": 100.0, "tooltip": "拐点宽度, MV/m"}),
        "e_min": ("FLOAT", {"default": -5.0, "min": -1000.0, "max": 1000.0, "tooltip": "模型定义域下限, MV/m"}),
        "e_max": ("FLOAT", {"default": 10.0, "min": -1000.0, "max": 1000.0, "tooltip": "模型定义域上限, MV/m"}),
        "depth_a0": ("FLOAT", {"default": 0.0, "min": 0.0, "max": 1000.0,
                               "tooltip": "施主深度 (a₀ ≈ 0.54 nm), 仅作元数据, 0 表示未指定"}),
    }


def _schedule_inputs() -> Dict[str, tuple]:
    return {
        "schedule_preset": ("STRING", {"default": "", "tooltip": "时间表预设, 格式 \"文件名 - Key名\""}),
        "e_start": ("FLOAT", {"default": 6.0, "min": -100.0, "max": 100.0, "tooltip": "起止电场 (电离侧), MV/m"}),
        "t_ramp_ns": ("FLOAT", {"default": 4.0, "min": 1e-6, "max": 1e4, "tooltip": "单程渐变时长, ns"}),
        "dt_ns": ("FLOAT", {"default": 5e-5, "min": 1e-9, "max": 1.0, "tooltip": "渐变段步长, 须整除 t_ramp_ns"}),
    }


def _tau_inputs() -> Dict[str, tuple]:
    return {
        "tau_mode": (["calibrate", "fixed"], {"default": "calibrate", "tooltip": "自动校准或使用 tau_ns"}),
        "tau_ns": ("FLOAT", {"default": 0.0, "min": 0.0, "max": 1e6, "tooltip": "tau_mode = fixed 时的停留时长, ns"}),
        "calibration_mode": (list(CALIBRATION_MODES), {"default": "dwell",
                                                       "tooltip": "dwell: 停留段 f = π; total: 单循环 c + f = π"}),
    }


def _resolve_tau(config: Dict[str, Any], params, model) -> float:
    if config["tau_mode"] == "fixed":
        return config["tau_ns"]
    return calibrate_tau(params, make_schedule(config, model), config["calibration_mode"])


def _output(out: Optional[Path], name: str) -> Path:
    return Path(out) if out else RESULTS_DIR / f"{name}.csv"


# ============================================
# 命令 1: 恒等式自检
# ============================================
def _broken_conjugate(g: DiagonalGate, mask: int) -> DiagonalGate:
    # 负对照: 把 X 共轭当作平凡操作
    return canonicalize(g)


class VerifyIdentitiesCommand:
    """门代数恒等式与普适性线路自检"""

    CATEGORY = "verification"
    FUNCTION = "run"
    RETURN_NAMES = ("identity", "max_error", "passed")

    @classmethod
    def INPUT_TYPES(cls) -> Dict[str, Any]:
        return {
            "required": {
                "seed": ("INT", {"default": 42, "min": 0, "max": 2 ** 32 - 1, "tooltip": "随机参数种子"}),
                "identity_samples": ("INT", {"default": 10000, "min": 1, "max": 10 ** 7,
                                             "tooltip": "随机参数组数"}),
            },
            "optional": {
                "universality_random": ("INT", {"default": 20, "min": 0, "max": 10 ** 5,
                                                "tooltip": "普适性线路的随机输入态个数"}),
                "negative_control": ("BOOLEAN", {"default": False,
                                                 "tooltip": "故意破坏 X 共轭约定, 自检应失败 (退出码 2)"}),
            },
        }

    def run(self, config: Dict[str, Any], out: Optional[Path] = None, jobs: int = 1) -> int:
        rng = np.random.default_rng(config["seed"])
        conjugate = _broken_conjugate if config["negative_control"] else None
        kwargs = {"conjugate": conjugate} if conjugate else {}
        logger.info(f"⏳ 恒等式自检: {config['identity_samples']} 组随机参数")
        report = identity_suite(rng, config["identity_samples"], **kwargs)
        report.update({f"universality_{k}": v
                       for k, v in verify_universality(rng, config["universality_random"]).items()})

        rows = [(name, err, err < IDENTITY_TOLERANCE) for name, err in report.items()]
        path = write_result_csv(_output(out, "verify_identities"), config, self.RETURN_NAMES, rows,
                                "verify-identities")
        for name, err, ok in rows:
            print(f"{'✅' if ok else '❌'} {name:<40s} max_error = {err:.3e}")

        failed = [name for name, _, ok in rows if not ok]
        if failed:
            raise NumericalError(f"恒等式未通过: {', '.join(failed)}")
        print(f"[verify-identities] 全部 {len(rows)} 条恒等式通过, 结果: {path}")
        return 0


# ============================================
# 命令 2: τ 校准
# ============================================
class CalibrateTauCommand:
    """校准 ROP 停留时长 τ"""

    CATEGORY = "protocol"
    FUNCTION = "run"
    RETURN_NAMES = ("tau_ns", "cz_rate_rad_per_ns", "dwell_conditional_phase", "high_field_estimate_ns")

    @classmethod
    def INPUT_TYPES(cls) -> Dict[str, Any]:
        return {
            "required": {**_physics_inputs(), **_schedule_inputs()},
            "optional": {
                "calibration_mode": _tau_inputs()["calibration_mode"],
                "export_schedule": ("BOOLEAN", {"default": False,
                                                "tooltip": "另存校准后的 E(t) / A(t) 采样 (<out>_schedule.csv)"}),
            },
        }

    def run(self, config: Dict[str, Any], out: Optional[Path] = None, jobs: int = 1) -> int:
        params = make_params(config)
        model = params.hyperfine
        schedule = make_schedule(config, model)
        tau = calibrate_tau(params, schedule, config["calibration_mode"])
        out = _output(out, "calibrate_tau")

        a_rop = float(hyperfine_at(model, schedule.e_rop))
        rate = cz_rate(params, a_rop)
        f = dwell_phases(params, a_rop, tau)[2]
        estimate = math.inf if a_rop == 0 else 1.0 / (2 * a_rop * 1e-3)
        path = write_result_csv(out, config, self.RETURN_NAMES,
                                [(float(tau), float(rate), float(f), estimate)], "calibrate-tau")
        if config["export_schedule"]:
            export_schedule_csv(schedule.with_tau(tau), model, out.with_name(f"{out.stem}_schedule{out.suffix}"))
        print(f"[calibrate-tau] τ = {tau:.9f} ns (高场估计 1/(2A) = {estimate:.6f} ns), 结果: {path}")
        return 0


# ============================================
# 命令 3: 穿梭时间扫描
# ============================================
class SweepShuttleCommand:
    """flip-flop 概率随穿梭时间的变化"""

    CATEGORY = "analysis"
    FUNCTION = "run"
    RETURN_NAMES = ("shuttle_time_ns", "flip_flop_probability")

    @classmethod
    def INPUT_TYPES(cls) -> Dict[str, Any]:
        return {
            "required": {
                **_physics_inputs(),
                "e_start": _schedule_inputs()["e_start"],
                "shuttle_times_ns": ("FLOAT_LIST", {"default": [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0],
                                                    "min": 1e-6, "max": 1e4, "tooltip": "穿梭时间列表, ns"}),
            },
            "optional": {
                "threshold": ("FLOAT", {"default": 1e-4, "min": 0.0, "max": 1.0,
                                        "tooltip": "摘要中报告首次低于该概率的穿梭时间"}),
                "all_depths": ("BOOLEAN", {"default": False,
                                           "tooltip": "额外对每个超精细预设各输出一份结果"}),
                "preset_dir": ("STRING", {"default": "", "tooltip": "all_depths 使用的预设目录, 留空为默认"}),
            },
        }

    def _sweep(self, config: Dict[str, Any], out: Path, jobs: int) -> Path:
        params = make_params(config)
        sweep = sweep_shuttle_time(params, config["e_start"], params.hyperfine.rop_field,
                                   config["shuttle_times_ns"], jobs=jobs)
        path = write_result_csv(out, config, self.RETURN_NAMES, sweep.rows, "sweep-shuttle")
        crossing = sweep.first_below(config["threshold"])
        where = f"{crossing} ns" if crossing is not None else "未出现"
        depth = params.hyperfine.depth_nm
        label = params.hyperfine.label if depth is None else f"{params.hyperfine.label} ({depth:.2f} nm)"
        print(f"[sweep-shuttle] {label}: 首次低于 {config['threshold']:.0e} 的穿梭时间 "
              f"{where}, 单调 = {sweep.monotone}, 结果: {path}")
        return path

    def run(self, config: Dict[str, Any], out: Optional[Path] = None, jobs: int = 1) -> int:
        out = _output(out, "sweep_shuttle")
        self._sweep(config, out, jobs)
        if config["all_depths"]:
            for selection in presets_in_category("hyperfine", config["preset_dir"]):
                depth_config = dict(config, hyperfine_preset=selection)
                for key in self._preset_keys(selection, config["preset_dir"]):
                    depth_config.pop(key, None)
                depth_config = resolve_config(self.INPUT_TYPES(), depth_config, config["preset_dir"])
                suffix = selection.split(" - ", 1)[1]
                self._sweep(depth_config, out.with_name(f"{out.stem}_{suffix}{out.suffix}"), jobs)
        return 0

    @staticmethod
    def _preset_keys(selection: str, preset_dir: str) -> List[str]:
        return list((load_preset(selection, preset_dir) or {}).keys())


# ============================================
# 命令 4: 电场偏移扫描
# ============================================
class SweepShiftCommand:
    """复合门对静态 / 交替电场偏移的敏感度"""

    CATEGORY = "analysis"
    FUNCTION = "run"
    RETURN_NAMES = ("kind", "delta_E_MV_per_m", "channel", "delta_rad", "worst_case_probability")

    @classmethod
    def INPUT_TYPES(cls) -> Dict[str, Any]:
        return {
            "required": {
                **_physics_inputs(),
                **_schedule_inputs(),
                **_tau_inputs(),
                "shift_kinds": (["both", "static", "alternating"], {"default": "both"}),
                "shift_deltas": ("FLOAT_LIST", {"default": [0.0, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
                                                "min": 0.0, "max": 10.0, "tooltip": "ΔE 列表, MV/m"}),
            },
            "optional": {
                "transit_idle_ns": ("FLOAT", {"default": 0.0, "min": 0.0, "max": 1e4,
                                              "tooltip": "每次循环渡越末尾的塞曼空闲, ns"}),
                "travel_time_ns": ("FLOAT", {"default": 0.0, "min": 0.0, "max": 1e4,
                                             "tooltip": "两个双循环之间的穿梭间隔, ns"}),
                "fit_min": ("FLOAT", {"default": 1e-3, "min": 0.0, "max": 10.0, "tooltip": "斜率拟合区间下限"}),
                "fit_max": ("FLOAT", {"default": 1e-1, "min": 0.0, "max": 10.0, "tooltip": "斜率拟合区间上限"}),
            },
        }

    def run(self, config: Dict[str, Any], out: Optional[Path] = None, jobs: int = 1) -> int:
        params = make_params(config)
        model = params.hyperfine
        tau = _resolve_tau(config, params, model)
        schedule = make_schedule(config, model, tau)
        kinds = ["static", "alternating"] if config["shift_kinds"] == "both" else [config["shift_kinds"]]

        sweep = sweep_shift(params, schedule, tau, kinds, config["shift_deltas"],
                            config["transit_idle_ns"], config["travel_time_ns"], jobs=jobs,
                            fit_range=(config["fit_min"], config["fit_max"]))
        path = write_result_csv(_output(out, "sweep_shift"), config, self.RETURN_NAMES, sweep.rows,
                                "sweep-shift")

        fitted = {key: s for key, s in sweep.slopes.items() if not math.isnan(s)}
        summary = ", ".join(f"{kind}/{channel}={slope:.2f}" for (kind, channel), slope in sorted(fitted.items()))
        drift = drift_estimates()
        print(f"[sweep-shift] τ = {tau:.6f} ns; 最大泄漏 {sweep.max_leakage:.2e}; "
              f"斜率: {summary or '无 (数据不足)'}; "
              f"漂移标记 慢 {drift['slow']:.4g} / 快 {drift['fast']:.3g} MV/m; 结果: {path}")
        return 0


# ============================================
# 命令 5: 偶极耦合
# ============================================
class DipolarCommand:
    """电子/核自旋对的最大偶极耦合"""

    CATEGORY = "spin_model"
    FUNCTION = "run"
    RETURN_NAMES = ("pair", "r_nm", "max_coupling_hz")

    @classmethod
    def INPUT_TYPES(cls) -> Dict[str, Any]:
        return {
            "required": {
                "dipolar_r_nm": ("FLOAT", {"default": 1.0, "min": 1e-6, "max": 1e6, "tooltip": "自旋间距, nm"}),
            },
        }

    def run(self, config: Dict[str, Any], out: Optional[Path] = None, jobs: int = 1) -> int:
        r = config["dipolar_r_nm"]
        table = dipolar_table(r)
        rows = [(pair, r, hz) for pair, hz in table]
        path = write_result_csv(_output(out, "dipolar"), config, self.RETURN_NAMES, rows, "dipolar")
        ee, en, nn = (hz for _, hz in table)
        print(f"[dipolar] r = {r} nm: 电子-电子 {ee / 1e6:.1f} MHz, 电子-核 {en / 1e3:.1f} kHz, "
              f"核-核 {nn:.1f} Hz, 结果: {path}")
        return 0


# ============================================
# 命令 6: 普适性线路
# ============================================
class UniversalityCommand:
    """由 ancilla-data CZ 合成 data-data CZ 与间接测量"""

    CATEGORY = "verification"
    FUNCTION = "run"
    RETURN_NAMES = ("circuit", "max_error", "passed")

    @classmethod
    def INPUT_TYPES(cls) -> Dict[str, Any]:
        return {
            "required": {
                "seed": ("INT", {"default": 42, "min": 0, "max": 2 ** 32 - 1}),
                "universality_random": ("INT", {"default": 20, "min": 0, "max": 10 ** 5}),
            },
        }

    def run(self, config: Dict[str, Any], out: Optional[Path] = None, jobs: int = 1) -> int:
        report = verify_universality(np.random.default_rng(config["seed"]), config["universality_random"])
        rows = [(name, err, err < UNIVERSALITY_TOLERANCE) for name, err in report.items()]
        path = write_result_csv(_output(out, "universality"), config, self.RETURN_NAMES, rows, "universality")
        failed = [name for name, _, ok in rows if not ok]
        if failed:
            raise NumericalError(f"普适性线路未通过: {', '.join(failed)}")
        print(f"[universality] {len(rows)} 条线路全部通过 (误差 < {UNIVERSALITY_TOLERANCE:.0e}), 结果: {path}")
        return 0


# ============================================
# 注册表
# ============================================
COMMAND_CLASS_MAPPINGS = {
    "verify-identities": VerifyIdentitiesCommand,
    "calibrate-tau": CalibrateTauCommand,
    "sweep-shuttle": SweepShuttleCommand,
    "sweep-shift": SweepShiftCommand,
    "dipolar": DipolarCommand,
    "universality": UniversalityCommand,
}

COMMAND_DISPLAY_NAME_MAPPINGS = {
    "verify-identities": "🧮 门代数恒等式自检 (Verify Identities)",
    "calibrate-tau": "⏱️ ROP 停留时长校准 (Calibrate τ)",
    "sweep-shuttle": "🚀 穿梭时间扫描 (Shuttle Sweep)",
    "sweep-shift": "⚡ 电场偏移敏感度扫描 (Shift Sweep)",
    "dipolar": "🧲 偶极耦合估算 (Dipolar)",
    "universality": "🔀 普适性线路验证 (Universality)",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="配置文件 (.json / .yaml / 结果 .csv)")
    common.add_argument("--out", type=Path, default=None, help="结果 CSV 路径")
    common.add_argument("--jobs", type=int, default=1, help="扫描并行进程数 (不影响结果)")
    common.add_argument("--preset-dir", default="", help="自定义预设目录")
    common.add_argument("--verbose", action="store_true", help="输出 DEBUG 日志与完整回溯")

    parser = argparse.ArgumentParser(prog="donor_gates",
                                     description="施主自旋绝热 + 动力学解耦门仿真工具")
    parser.add_argument("--version", action="version", version=f"donor_gates {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, cls in COMMAND_CLASS_MAPPINGS.items():
        sub.add_parser(name, parents=[common], help=COMMAND_DISPLAY_NAME_MAPPINGS[name],
                       description=cls.__doc__)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    if not check_dependencies():
        return 1
    if args.jobs < 1:
        logger.error(f"❌ --jobs 必须为正整数: {args.jobs}")
        return 1

    try:
        user = load_config(args.config) if args.config else {}
        command = COMMAND_CLASS_MAPPINGS[args.command]()
        config = resolve_config(command.INPUT_TYPES(), user, args.preset_dir)
        return getattr(command, command.FUNCTION)(config, args.out, args.jobs)
    except DonorGateError as e:
        logger.error(f"❌ {e}")
        if args.verbose:
            traceback.print_exc()
        return e.exit_code
    except Exception as e:
        logger.error(f"❌ 未预期的错误: {e}")
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
