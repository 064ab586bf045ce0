"""
DonorGates ToolBox - 公共工具

本文件包含:
1. 依赖检查 (check_dependencies)
2. 异常类型 (DonorGateError 及其子类)
3. 日志初始化 (setup_logging)
4. 配置文件与结果 CSV 的读写
"""

import csv
import importlib.util
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

__version__ = "0.3.0"

# ============================================
# 依赖检查
# ============================================
REQUIRED_PACKAGES = {
    "numpy": "numpy>=1.22",
    "scipy": "scipy>=1.8",
    "yaml": "PyYAML>=6.0",
}


def check_dependencies() -> bool:
    """检查并报告依赖库的安装状态"""
    missing = [package for module, package in REQUIRED_PACKAGES.items()
               if importlib.util.find_spec(module) is None]

    if missing:
        print("=" * 60, file=sys.stderr)
        print("[DonorGates] 错误: 缺少必要的依赖库!", file=sys.stderr)
        print("请运行以下命令安装:", file=sys.stderr)
        print(f"  pip install {' '.join(missing)}", file=sys.stderr)
        print("或:", file=sys.stderr)
        print("  pip install -r requirements.txt", file=sys.stderr)
        print("=" * 60, file=sys.stderr)
        return False
    return True


# ============================================
# 异常类型
# ============================================
class DonorGateError(Exception):
    """本工具箱所有错误的基类"""

    exit_code = 2


class ConfigError(DonorGateError):
    """配置或输入校验失败 (CLI 退出码 1)"""

    exit_code = 1


class DomainError(ConfigError, ValueError):
    """参数超出模型定义域 (例如 E 超出超精细表格范围)"""


class NumericalError(DonorGateError):
    """数值失败 (CLI 退出码 2)"""

    exit_code = 2


class LeakageError(NumericalError):
    """绝热循环泄漏过大, 相位提取失去意义"""


class DegenerateSpectrumError(NumericalError):
    """能级简并, 绝热标签无法定义"""


# ============================================
# 日志
# ============================================
class _TagFormatter(logging.Formatter):
    """输出格式: [模块名] 消息"""

    def format(self, record: logging.LogRecord) -> str:
        tag = record.name.rsplit(".", 1)[-1]
        return f"[{tag}] {record.getMessage()}"


def setup_logging(verbose: bool = False) -> logging.Logger:
    """
    为 donor_gates 包安装控制台日志处理器 (重复调用只安装一次)

    Args:
        verbose: True 时输出 DEBUG 级别

    Returns:
        logging.Logger: 包级 logger
    """
    logger = logging.getLogger("donor_gates")
    if not any(getattr(h, "_donor_gates", False) for h in logger.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(_TagFormatter())
        handler._donor_gates = True
        logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    logger.propagate = False
    return logger


# ============================================
# 配置读写
# ============================================
CONFIG_ECHO_PREFIX = "# config: "


def load_config(path: Path) -> Dict[str, Any]:
    """
    读取配置文件

    支持三种来源:
    - .json: UTF-8 JSON
    - .yaml / .yml: PyYAML safe_load
    - .csv: 本工具输出的结果文件, 从 "# config:" 回显行还原配置

    Raises:
        ConfigError: 文件不存在或无法解析
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"配置文件不存在: {path}")

    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            import yaml
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f)
        elif path.suffix.lower() == ".csv":
            data = read_config_echo(path)
        else:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
    except ConfigError:
        raise
    except Exception as e:
        raise ConfigError(f"配置文件解析失败 {path}: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError(f"配置文件顶层必须是对象: {path}")
    return data


def save_config(config: Dict[str, Any], path: Path) -> None:
    """保存配置 (UTF-8 JSON, indent=2)"""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2, ensure_ascii=False, sort_keys=True)


def config_echo(config: Dict[str, Any]) -> str:
    """配置回显字符串: 键排序, 保证逐字节可复现"""
    return json.dumps(config, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def read_config_echo(path: Path) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.startswith(CONFIG_ECHO_PREFIX):
                return json.loads(line[len(CONFIG_ECHO_PREFIX):])
            if not line.startswith("#"):
                break
    raise ConfigError(f"结果文件中没有配置回显行: {path}")


# ============================================
# 结果 CSV
# ============================================
def format_float(value: float) -> str:
    """repr 格式的浮点数, 保证往返无损"""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    return repr(float(value))


def write_result_csv(path: Path, config: Dict[str, Any], header: Sequence[str],
                     rows: Iterable[Sequence[Any]], command: str) -> Path:
    """
    写出结果 CSV: 以 # 开头的注释行回显版本和完整配置, 之后是表头和数据

    Args:
        path: 输出路径
        config: 生效配置 (已校验)
        header: 列名
        rows: 数据行
        command: 子命令名

    Returns:
        Path: 实际写出的路径
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# donor_gates {__version__} {command}\n")
        f.write(CONFIG_ECHO_PREFIX + config_echo(config) + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return path


def read_result_csv(path: Path) -> List[Dict[str, str]]:
    """读取结果 CSV 的数据部分 (跳过 # 注释行)"""
    with open(path, "r", encoding="utf-8") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))
