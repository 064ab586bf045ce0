"""共享夹具: 粗步长的时间表, 保证整套测试在几分钟内跑完"""

import numpy as np
import pytest

from donor_gates import config as config_module
from donor_gates.control import build_schedule
from donor_gates.protocol import calibrate_tau
from donor_gates.spin_model import HyperfineModel, SpinPairParams

FAST_DT = 1e-3
FAST_RAMP = 0.5
# 4 ns 渐变: 无噪声复合门泄漏 ~1e-8, 低于 1e-6 的门误差上限
ADIABATIC_RAMP = 4.0


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def model():
    return HyperfineModel()


@pytest.fixture
def params(model):
    return SpinPairParams(b_field_mt=100.0, hyperfine=model)


@pytest.fixture
def fast_schedule(model):
    """6 → 2 MV/m, 0.5 ns 渐变, dt = 1 ps; 泄漏 ~1e-3, 只用于时间表几何与传播子检查"""
    return build_schedule(6.0, model.rop_field, FAST_RAMP, 0.0, FAST_DT)


@pytest.fixture
def adiabatic_schedule(model):
    """6 → 2 MV/m, 4 ns 渐变, dt = 1 ps"""
    return build_schedule(6.0, model.rop_field, ADIABATIC_RAMP, 0.0, FAST_DT)


@pytest.fixture
def tau(params, adiabatic_schedule):
    return calibrate_tau(params, adiabatic_schedule)


@pytest.fixture(autouse=True)
def reset_preset_cache(monkeypatch):
    """预设扫描结果是模块级缓存, 每个测试从默认目录重新开始"""
    monkeypatch.setattr(config_module, "_PRESETS_CACHE", None)
    monkeypatch.setattr(config_module, "_CUSTOM_PRESETS_DIR", None)
