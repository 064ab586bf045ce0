"""
配置: INPUT_TYPES 模式解析、预设库扫描、参数对象构造

生效配置 = 模式默认值 < 预设 (hyperfine_preset / schedule_preset) < 用户配置文件
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from .control import ShuttleSchedule, build_schedule
from .spin_model import HyperfineModel, SpinPairParams, load_hyperfine_table
from .utils import ConfigError

logger = logging.getLogger(__name__)

# ============================================
# 全局常量定义
# ============================================
# 项目根目录 (donor_gates 的父目录)
PROJECT_ROOT = Path(__file__).parent.parent.absolute()

# 预设库路径
PRESETS_DIR = PROJECT_ROOT / "presets"

PRESET_KEYS = ("hyperfine_preset", "schedule_preset")

HYPERFINE_KEYS = ("a_max_mhz", "e_rop", "kappa", "knee", "knee_width", "e_min", "e_max")

# 全局缓存预设列表
_PRESETS_CACHE: Optional[List[str]] = None
_CUSTOM_PRESETS_DIR: Optional[Path] = None


# ============================================
# 预设库
# ============================================
def _presets_dir(custom_path: str = "") -> Path:
    if custom_path and str(custom_path).strip():
        return Path(str(custom_path).strip())
    if _CUSTOM_PRESETS_DIR:
        return _CUSTOM_PRESETS_DIR
    return PRESETS_DIR


def scan_presets_directory(force_refresh: bool = False, custom_path: str = "") -> List[str]:
    """
    扫描预设目录下的所有 YAML 文件, 返回预设选项列表

    Args:
        force_refresh: 是否强制刷新缓存
        custom_path: 自定义预设文件夹路径

    Returns:
        List[str]: 格式为 "文件名 - Key名" 的预设选项列表
    """
    global _PRESETS_CACHE, _CUSTOM_PRESETS_DIR

    if custom_path and str(custom_path).strip():
        _CUSTOM_PRESETS_DIR = Path(str(custom_path).strip())
        force_refresh = True
    presets_dir = _presets_dir()

    if not force_refresh and _PRESETS_CACHE is not None:
        return _PRESETS_CACHE

    presets = []
    if not presets_dir.exists():
        logger.warning(f"⚠️ 预设目录不存在: {presets_dir}")
        _PRESETS_CACHE = []
        return _PRESETS_CACHE

    for yaml_file in sorted(presets_dir.glob("*.yaml")):
        try:
            with open(yaml_file, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f)
            if data and isinstance(data, dict):
                for key in data.keys():
                    presets.append(f"{yaml_file.stem} - {key}")
        except Exception as e:
            logger.warning(f"⚠️ 解析文件失败 {yaml_file}: {e}")
            continue

    _PRESETS_CACHE = presets
    return _PRESETS_CACHE


def load_preset(selection: str, custom_path: str = "") -> Optional[Dict[str, Any]]:
    """
    根据选择加载对应预设的参数

    Args:
        selection: 格式为 "文件名 - Key名"
        custom_path: 自定义预设文件夹路径

    Returns:
        Optional[Dict]: 预设的 params 字典, 失败返回 None
    """
    try:
        parts = selection.split(" - ", 1)
        if len(parts) != 2:
            return None
        filename, key = parts
        yaml_path = _presets_dir(custom_path) / f"{filename}.yaml"
        if not yaml_path.exists():
            return None

        with open(yaml_path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
        if isinstance(data, dict) and key in data and isinstance(data[key].get("params"), dict):
            return dict(data[key]["params"])
        return None
    except Exception as e:
        logger.warning(f"⚠️ 加载预设失败 {selection}: {e}")
        return None


def presets_in_category(category: str, custom_path: str = "") -> List[str]:
    """某一类别 (如 hyperfine) 下的全部预设选项"""
    selected = []
    for selection in scan_presets_directory(custom_path=custom_path):
        filename, key = selection.split(" - ", 1)
        with open(_presets_dir(custom_path) / f"{filename}.yaml", "r", encoding="utf-8") as f:
            entry = (yaml.safe_load(f) or {}).get(key) or {}
        if entry.get("category") == category:
            selected.append(selection)
    return selected


# ============================================
# 模式解析与校验
# ============================================
def schema_defaults(schema: Dict[str, Dict[str, tuple]]) -> Dict[str, Any]:
    defaults = {}
    for section in ("required", "optional"):
        for key, (kind, options) in schema.get(section, {}).items():
            default = options.get("default")
            if default is None and isinstance(kind, list):
                default = kind[0]
            defaults[key] = list(default) if isinstance(default, (list, tuple)) else default
    return defaults


def _schema_entries(schema: Dict[str, Dict[str, tuple]]) -> Dict[str, tuple]:
    entries = {}
    for section in ("required", "optional"):
        entries.update(schema.get(section, {}))
    return entries


def _check_range(key: str, value: float, options: Dict[str, Any]) -> None:
    if "min" in options and value < options["min"]:
        raise ConfigError(f"{key} = {value} 小于下限 {options['min']}")
    if "max" in options and value > options["max"]:
        raise ConfigError(f"{key} = {value} 超过上限 {options['max']}")


def _coerce(key: str, kind, options: Dict[str, Any], value: Any) -> Any:
    if isinstance(kind, list):
        if value not in kind:
            raise ConfigError(f"{key} = {value!r} 不在可选项 {kind} 中")
        return value
    if kind == "BOOLEAN":
        if not isinstance(value, bool):
            raise ConfigError(f"{key} 必须为布尔值, 收到 {value!r}")
        return value
    if kind == "INT":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} 必须为整数, 收到 {value!r}")
        _check_range(key, value, options)
        return value
    if kind == "FLOAT":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{key} 必须为有限实数, 收到 {value!r}")
        _check_range(key, float(value), options)
        return float(value)
    if kind == "FLOAT_LIST":
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key} 必须为数值列表, 收到 {value!r}")
        items = [_coerce(key, "FLOAT", options, v) for v in value]
        return items
    if kind == "STRING":
        if not isinstance(value, str):
            raise ConfigError(f"{key} 必须为字符串, 收到 {value!r}")
        return value
    raise ConfigError(f"{key}: 未知类型 {kind}")


def resolve_config(schema: Dict[str, Dict[str, tuple]], user: Optional[Dict[str, Any]] = None,
                   preset_dir: str = "") -> Dict[str, Any]:
    """
    合并默认值、预设与用户配置并逐项校验 (在任何计算之前)

    Args:
        schema: 命令类 INPUT_TYPES() 的返回值
        user: 用户配置
        preset_dir: 自定义预设目录

    Returns:
        Dict[str, Any]: 生效配置 (键完整)

    Raises:
        ConfigError: 未知键、类型/范围/可选项不符、预设不存在
    """
    user = dict(user or {})
    entries = _schema_entries(schema)
    unknown = sorted(set(user) - set(entries))
    if unknown:
        raise ConfigError(f"未知配置键: {', '.join(unknown)}")

    config = schema_defaults(schema)
    for preset_key in PRESET_KEYS:
        selection = user.get(preset_key, config.get(preset_key))
        if preset_key not in entries or not selection:
            continue
        params = load_preset(selection, preset_dir)
        if params is None:
            raise ConfigError(f"预设不存在或无法解析: {selection}")
        stray = sorted(set(params) - set(entries))
        if stray:
            raise ConfigError(f"预设 {selection} 含本命令不接受的键: {', '.join(stray)}")
        config.update(params)
        logger.debug(f"已应用预设: {selection}")

    config.update(user)
    return {key: _coerce(key, entries[key][0], entries[key][1], value) for key, value in config.items()}


# ============================================
# 参数对象构造
# ============================================
def make_hyperfine(config: Dict[str, Any]) -> HyperfineModel:
    """表格路径非空时读表格, 否则按解析模型参数构造"""
    table = config.get("hyperfine_table", "")
    depth = config.get("depth_a0") or None
    if table:
        return load_hyperfine_table(Path(table), depth_a0=depth)
    params = {key: config[key] for key in HYPERFINE_KEYS if key in config}
    label = config.get("hyperfine_preset") or "synthetic"
    return HyperfineModel(kind="analytic", depth_a0=depth, label=label, **params)


def make_params(config: Dict[str, Any]) -> SpinPairParams:
    return SpinPairParams(b_field_mt=config["b_field_mt"], hyperfine=make_hyperfine(config))


def make_schedule(config: Dict[str, Any], model: HyperfineModel, tau: float = 0.0) -> ShuttleSchedule:
    """E_rop 取自超精细模型的最大值位置"""
    return build_schedule(config["e_start"], model.rop_field, config["t_ramp_ns"], tau, config["dt_ns"])


__all__ = [
    "PROJECT_ROOT", "PRESETS_DIR", "PRESET_KEYS", "HYPERFINE_KEYS",
    "scan_presets_directory", "load_preset", "presets_in_category",
    "schema_defaults", "resolve_config", "make_hyperfine", "make_params", "make_schedule",
]
