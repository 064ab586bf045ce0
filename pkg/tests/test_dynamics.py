"""时间演化测试: 步进矩阵、有序乘积、分段传播、绝热循环与泄漏"""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from donor_gates import dynamics
from donor_gates.analysis import MONOTONE_FLOOR, fit_loglog_slope
from donor_gates.control import ShiftSpec, apply_shift, build_schedule
from donor_gates.dynamics import (
    adiabatic_cycle, constant_unitary, flip_flop_probability, leakage_probability, ordered_product,
    propagate, ramp_flip_flop_probability, ramp_schedule, step_unitaries, unitarity_defect,
)
from donor_gates.gate_algebra import phase_distance
from donor_gates.spin_model import HyperfineModel, SpinPairParams, cz_rate, eigensystem, hamiltonian
from donor_gates.utils import ConfigError, LeakageError


def random_hermitian(rng, n=4):
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (m + m.conj().T) / 2


# ═══════════════════════════════════════════════════════════════════════════
# 底层
# ═══════════════════════════════════════════════════════════════════════════

class TestPrimitives:

    def test_step_unitaries_match_expm(self, rng):
        hs = np.stack([random_hermitian(rng) for _ in range(3)])
        us = step_unitaries(hs, 0.37)
        for h, u in zip(hs, us):
            np.testing.assert_allclose(u, expm(-1j * h * 0.37), atol=1e-12)

    @pytest.mark.parametrize("count", [1, 2, 3, 7, 16])
    def test_ordered_product_order(self, rng, count):
        us = np.stack([expm(-1j * random_hermitian(rng)) for _ in range(count)])
        expected = np.eye(4)
        for u in us:
            expected = u @ expected
        np.testing.assert_allclose(ordered_product(us), expected, atol=1e-12)

    def test_ordered_product_empty(self):
        with pytest.raises(ValueError):
            ordered_product(np.zeros((0, 4, 4)))

    def test_constant_unitary(self, params):
        h = hamiltonian(params, 117.0)
        np.testing.assert_allclose(constant_unitary(h, 2.5), expm(-1j * h * 2.5), atol=1e-12)
        assert unitarity_defect(constant_unitary(h, 2.5)) < 1e-13


# ═══════════════════════════════════════════════════════════════════════════
# 传播
# ═══════════════════════════════════════════════════════════════════════════

class TestPropagate:

    def test_constant_field_is_exact(self, params):
        # E_start = E_rop: 渐变段与停留段都是同一个恒定哈密顿量
        s = build_schedule(2.0, 2.0, 0.5, 1.3, 1e-2)
        result = propagate(params, s)
        expected = constant_unitary(hamiltonian(params, 117.0), s.t_total)
        np.testing.assert_allclose(result.unitary, expected, atol=1e-10)
        assert result.step_count == 2 * 50 + 1

    def test_chunking_does_not_change_result(self, params, fast_schedule, monkeypatch):
        reference = propagate(params, fast_schedule).unitary
        monkeypatch.setattr(dynamics, "CHUNK_STEPS", 7)
        np.testing.assert_allclose(propagate(params, fast_schedule).unitary, reference, atol=1e-12)

    def test_unitarity(self, params, fast_schedule):
        assert propagate(params, fast_schedule.with_tau(2.0)).max_unitarity_defect < 1e-9

    def test_incommensurate_dt(self, params, fast_schedule):
        with pytest.raises(ConfigError):
            propagate(params, fast_schedule, dt=0.3)

    def test_second_order_convergence(self, params, fast_schedule):
        reference = propagate(params, fast_schedule, dt=1.25e-4).unitary
        steps = [4e-3, 2e-3, 1e-3]
        errors = [np.max(np.abs(propagate(params, fast_schedule, dt=h).unitary - reference)) for h in steps]
        assert fit_loglog_slope(steps, errors, floor=0.0) == pytest.approx(2.0, abs=0.2)

    def test_zero_hyperfine_is_diagonal(self, fast_schedule):
        params = SpinPairParams(100.0, HyperfineModel(a_max_mhz=0.0))
        u = propagate(params, fast_schedule).unitary
        np.testing.assert_allclose(u, np.diag(np.diag(u)), atol=1e-15)
        assert flip_flop_probability(u) == 0.0


# ═══════════════════════════════════════════════════════════════════════════
# 概率
# ═══════════════════════════════════════════════════════════════════════════

class TestProbabilities:

    def test_identity_has_no_flip_flop(self):
        assert flip_flop_probability(np.eye(4)) == 0.0
        assert leakage_probability(np.eye(4)) == 0.0

    def test_full_swap(self):
        swap = np.eye(4)[[0, 2, 1, 3]]
        assert flip_flop_probability(swap) == pytest.approx(1.0)
        assert leakage_probability(swap) == pytest.approx(1.0)

    def test_endpoint_basis(self, params):
        v = eigensystem(params, 117.0).vectors
        assert flip_flop_probability(v, (np.eye(4), v)) == pytest.approx(0.0, abs=1e-15)
        assert flip_flop_probability(np.eye(4), (np.eye(4), v)) == pytest.approx(
            math.sin(eigensystem(params, 117.0).mixing_angle) ** 2)


# ═══════════════════════════════════════════════════════════════════════════
# 绝热循环
# ═══════════════════════════════════════════════════════════════════════════

class TestAdiabaticCycle:

    def test_dwell_phases_follow_rate(self, params, fast_schedule):
        tau = 1.7
        run = adiabatic_cycle(params, fast_schedule.with_tau(tau))
        assert phase_distance(run.cycle.f, -cz_rate(params, 117.0) * tau) < 1e-12
        assert run.cycle.tau == tau
        assert run.leakage < 1e-3

    def test_transit_independent_of_dwell(self, params, adiabatic_schedule):
        short = adiabatic_cycle(params, adiabatic_schedule.with_tau(0.0)).cycle
        long = adiabatic_cycle(params, adiabatic_schedule.with_tau(3.1)).cycle
        for name in ("a", "b", "c"):
            assert phase_distance(getattr(short, name), getattr(long, name)) < 1e-4, name

    def test_static_shift_changes_transit(self, params, fast_schedule):
        nominal = adiabatic_cycle(params, fast_schedule).cycle
        shifted = adiabatic_cycle(params, apply_shift(fast_schedule, ShiftSpec("static", 0.05))).cycle
        assert max(phase_distance(getattr(nominal, n), getattr(shifted, n)) for n in ("a", "b", "c")) > 1e-6

    def test_sudden_swap_raises_leakage(self, model):
        # 低场 + 瞬时渐变: 在 ROP 处 flip-flop 子块强混合, 停留半个周期完成交换
        params = SpinPairParams(0.1, model)
        gap = eigensystem(params, 117.0).gap
        s = build_schedule(6.0, 2.0, 0.01, math.pi / gap, 1e-4)
        with pytest.raises(LeakageError):
            adiabatic_cycle(params, s)


class TestRampFlipFlop:

    def test_sudden_limit(self, params):
        s = ramp_schedule(6.0, 2.0, 1e-3, dt=1e-5)
        expected = math.sin(eigensystem(params, 117.0).mixing_angle) ** 2
        assert ramp_flip_flop_probability(params, s) == pytest.approx(expected, rel=1e-2)

    def test_slow_ramp_is_adiabatic(self, params):
        fast = ramp_flip_flop_probability(params, ramp_schedule(6.0, 2.0, 0.05, dt=1e-3))
        slow = ramp_flip_flop_probability(params, ramp_schedule(6.0, 2.0, 5.0, dt=1e-3))
        assert fast > 1e-4
        assert slow < 1e-2 * fast

    def test_ramp_schedule_default_dt(self):
        s = ramp_schedule(6.0, 2.0, 0.12345)
        assert s.dt <= dynamics.DEFAULT_DT
        assert s.ramp_steps * s.dt == pytest.approx(0.12345)
        assert s.tau == 0.0

    def test_field_protects_against_flip_flop(self, model):
        s = ramp_schedule(6.0, 2.0, 0.05, dt=1e-3)
        low = ramp_flip_flop_probability(SpinPairParams(50.0, model), s)
        high = ramp_flip_flop_probability(SpinPairParams(200.0, model), s)
        assert high < low

    @pytest.mark.slow
    def test_stretched_ramps_reach_threshold(self, params):
        # 拉伸 ×2 / ×4 / ×8
        probs = [ramp_flip_flop_probability(params, ramp_schedule(6.0, 2.0, t)) for t in (0.5, 1.0, 2.0, 4.0)]
        for longer, shorter in zip(probs[1:], probs):
            assert longer <= shorter + MONOTONE_FLOOR
        assert probs[-1] < 1e-4
