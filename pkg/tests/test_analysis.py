"""误差分析测试: Walsh 通道分解、斜率拟合、扫描驱动与漂移换算"""

import math

import numpy as np
import pytest

from donor_gates.analysis import (
    LEAKAGE_BOUND, LEAKAGE_CHANNEL, TRANSIT_CHANNEL, ChannelReport, channel_labels, decompose_unitary,
    drift_estimates, drift_to_field, fit_loglog_slope, phase_channels, reconstruct_phases,
    sweep_shift, sweep_shuttle_time, worst_case_probability,
)
from donor_gates.gate_algebra import wrap_phase
from donor_gates.utils import ConfigError


# ═══════════════════════════════════════════════════════════════════════════
# 通道分解
# ═══════════════════════════════════════════════════════════════════════════

class TestChannels:

    def test_labels(self):
        assert channel_labels(2) == ["IZ", "ZI", "ZZ"]
        assert len(channel_labels(3)) == 7
        assert channel_labels(3)[0] == "IIZ"

    def test_single_z_channel(self):
        theta = 0.3
        deltas = phase_channels([0.0, theta, 0.0, theta])
        assert deltas["IZ"] == pytest.approx(theta)
        assert deltas["ZI"] == pytest.approx(0.0, abs=1e-15)
        assert deltas["ZZ"] == pytest.approx(0.0, abs=1e-15)

    def test_global_phase_is_ignored(self):
        base = phase_channels([0.1, 0.4, -0.2, 0.9])
        shifted = phase_channels(np.array([0.1, 0.4, -0.2, 0.9]) + 1.7)
        assert base == pytest.approx(shifted)

    def test_reconstruct_inverts(self, rng):
        phases = rng.uniform(-1.0, 1.0, size=8)
        rebuilt = reconstruct_phases(phase_channels(phases), 3)
        np.testing.assert_allclose(rebuilt, wrap_phase(phases - phases[0]), atol=1e-12)

    @pytest.mark.parametrize("delta, expected", [(0.0, 0.0), (math.pi, 1.0), (math.pi / 2, 0.5)])
    def test_worst_case_probability(self, delta, expected):
        assert worst_case_probability(delta) == pytest.approx(expected)


class TestDecomposeUnitary:

    def test_identity(self):
        report = decompose_unitary(np.eye(4), np.eye(4), ("ancilla", "data"))
        assert report.leakage_probability == 0.0
        assert report.max_phase_probability == pytest.approx(0.0, abs=1e-30)
        assert report.qubits == ("ancilla", "data")

    def test_default_qubit_names(self):
        assert decompose_unitary(np.eye(8), np.eye(8)).qubits == ("q0", "q1", "q2")

    def test_phase_error(self):
        realized = np.diag(np.exp(1j * np.array([0.0, 0.0, 0.0, 0.02])))
        report = decompose_unitary(realized, np.eye(4))
        # 条件相位 0.02 → ZZ 转角 -0.01, 单比特各 0.01
        assert report.deltas["ZZ"] == pytest.approx(-0.01)
        assert report.deltas["IZ"] == pytest.approx(0.01)
        assert report.leakage_probability == pytest.approx(0.0, abs=1e-30)

    def test_leakage(self):
        c, s = math.cos(0.1), math.sin(0.1)
        realized = np.eye(4, dtype=complex)
        realized[1:3, 1:3] = [[c, -s], [s, c]]
        report = decompose_unitary(realized, np.eye(4))
        assert report.leakage_probability == pytest.approx(s ** 2)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            decompose_unitary(np.eye(4), np.eye(8))

    def test_total_error_is_clipped(self):
        report = ChannelReport(("a",), 0.9, {"Z": math.pi})
        assert report.total_error == 1.0


# ═══════════════════════════════════════════════════════════════════════════
# 斜率拟合
# ═══════════════════════════════════════════════════════════════════════════

class TestFitSlope:

    @pytest.mark.parametrize("power", [1.0, 2.0, 4.0])
    def test_power_law(self, power):
        x = np.logspace(-3, -1, 6)
        assert fit_loglog_slope(x, 3.0 * x ** power) == pytest.approx(power)

    def test_floor_and_zero_are_excluded(self):
        x = [0.0, 1e-3, 1e-2, 1e-1]
        y = [5.0, 0.0, 1e-4, 1e-2]
        assert fit_loglog_slope(x, y) == pytest.approx(2.0)

    def test_fit_range(self):
        x = np.array([1e-4, 1e-3, 1e-2, 1e-1, 1.0])
        y = np.array([1.0, 1e-6, 1e-4, 1e-2, 1e3])
        assert fit_loglog_slope(x, y, fit_range=(1e-3, 1e-1)) == pytest.approx(2.0)

    def test_too_few_points(self):
        assert math.isnan(fit_loglog_slope([0.1], [0.01]))
        assert math.isnan(fit_loglog_slope([0.1, 0.2], [0.0, 0.0]))


# ═══════════════════════════════════════════════════════════════════════════
# 穿梭时间扫描
# ═══════════════════════════════════════════════════════════════════════════

class TestSweepShuttle:

    def test_probability_decays(self, params):
        sweep = sweep_shuttle_time(params, 6.0, 2.0, [0.05, 0.5, 5.0], dt=1e-3)
        probs = [row.flip_flop_probability for row in sweep.rows]
        assert [row.shuttle_time_ns for row in sweep.rows] == [0.05, 0.5, 5.0]
        assert probs[0] > 1e-4
        assert probs[2] < 1e-2 * probs[0]
        assert sweep.monotone
        assert sweep.first_below(1e-6) == 5.0
        assert sweep.first_below(0.0) is None

    @pytest.mark.parametrize("times", [[], [0.1, 0.0], [-1.0]])
    def test_invalid_times(self, params, times):
        with pytest.raises(ConfigError):
            sweep_shuttle_time(params, 6.0, 2.0, times, dt=1e-3)

    def test_parallel_matches_serial(self, params):
        times = [0.05, 0.1, 0.2]
        serial = sweep_shuttle_time(params, 6.0, 2.0, times, dt=1e-3, jobs=1)
        parallel = sweep_shuttle_time(params, 6.0, 2.0, times, dt=1e-3, jobs=2)
        assert serial.rows == parallel.rows


# ═══════════════════════════════════════════════════════════════════════════
# 电场偏移扫描
# ═══════════════════════════════════════════════════════════════════════════

SMALL_DELTAS = [0.001, 0.002, 0.004, 0.008]
ACCEPTANCE_DELTAS = [0.001, 0.003, 0.01, 0.03, 0.1]
# 最大 ΔE 处低于此概率的通道视为不响应
RESPONSE_FLOOR = 1e-12


class TestSweepShift:

    def test_static_is_second_order(self, params, adiabatic_schedule, tau):
        sweep = sweep_shift(params, adiabatic_schedule, tau, ["static"], SMALL_DELTAS)
        # 停留处 dA/dE = 0: δ ∝ ΔE², 概率 ∝ ΔE⁴; 条件相位误差 ε 对应 ZZ 串转角 ε/2
        assert sweep.slopes[("static", "ZIZ")] == pytest.approx(4.0, abs=0.2)
        row = [r for r in sweep.rows if r.channel == "ZIZ" and r.delta_e == 0.008][0]
        assert abs(row.delta_rad) == pytest.approx(0.5 * math.pi * 0.02 * 0.008 ** 2, rel=0.05)

    def test_alternating_is_first_order(self, params, adiabatic_schedule, tau):
        sweep = sweep_shift(params, adiabatic_schedule, tau, ["alternating"], SMALL_DELTAS)
        assert sweep.slopes[("alternating", "ZIZ")] == pytest.approx(2.0, abs=0.3)

    def test_rows_and_lookup(self, params, adiabatic_schedule, tau):
        sweep = sweep_shift(params, adiabatic_schedule, tau, ["static", "alternating"], [0.01])
        # 7 个 Z 串 + 泄漏 + 渡越, 每种偏移各一组
        assert len(sweep.rows) == 2 * 9
        channels = {r.channel for r in sweep.rows}
        assert {LEAKAGE_CHANNEL, TRANSIT_CHANNEL, "ZIZ", "IZZ"} <= channels
        assert all(math.isnan(r.delta_rad) for r in sweep.rows if r.channel in (LEAKAGE_CHANNEL, TRANSIT_CHANNEL))
        p = sweep.probability("static", 0.01, "ZIZ")
        assert 0.0 <= p < 1e-6
        with pytest.raises(KeyError):
            sweep.probability("static", 0.5, "ZIZ")

    def test_zero_shift_is_clean(self, params, adiabatic_schedule, tau):
        sweep = sweep_shift(params, adiabatic_schedule, tau, ["static"], [0.0])
        assert max(r.worst_case_probability for r in sweep.rows) < 1e-6
        assert all(math.isnan(s) for s in sweep.slopes.values())
        assert sweep.adiabatic
        assert sweep.max_leakage < LEAKAGE_BOUND

    def test_short_ramps_are_flagged(self, params, fast_schedule, tau):
        # 0.5 ns 渐变: 8 次渐变累积的 flip-flop 泄漏 ~1e-3
        sweep = sweep_shift(params, fast_schedule, tau, ["static"], [0.0])
        assert not sweep.adiabatic
        assert sweep.max_leakage > LEAKAGE_BOUND

    @pytest.mark.parametrize("kinds, deltas", [(["static"], []), (["wobble"], [0.01])])
    def test_invalid_inputs(self, params, adiabatic_schedule, tau, kinds, deltas):
        with pytest.raises(ConfigError):
            sweep_shift(params, adiabatic_schedule, tau, kinds, deltas)

    def test_parallel_matches_serial(self, params, adiabatic_schedule, tau):
        serial = sweep_shift(params, adiabatic_schedule, tau, ["static"], [0.01, 0.02], jobs=1)
        parallel = sweep_shift(params, adiabatic_schedule, tau, ["static"], [0.01, 0.02], jobs=2)
        assert [r.worst_case_probability for r in serial.rows] == \
            [r.worst_case_probability for r in parallel.rows]
        np.testing.assert_array_equal([r.delta_rad for r in serial.rows],
                                      [r.delta_rad for r in parallel.rows])


# ═══════════════════════════════════════════════════════════════════════════
# 漂移换算
# ═══════════════════════════════════════════════════════════════════════════

class TestDrift:

    def test_estimates(self):
        drift = drift_estimates()
        assert drift["slow"] == pytest.approx(3.3 * 0.026)
        assert drift["fast"] == pytest.approx(3.3 * 0.026 * math.sqrt(1e-3 / 8640.0))

    def test_invalid_time(self):
        with pytest.raises(ConfigError):
            drift_to_field(1.0, 0.026, 0.0, 1.0)


# ═══════════════════════════════════════════════════════════════════════════
# 完整步长验收
# ═══════════════════════════════════════════════════════════════════════════

@pytest.mark.slow
class TestAcceptance:

    @pytest.fixture(scope="class")
    def standard(self):
        from donor_gates.config import load_preset
        from donor_gates.control import build_schedule
        from donor_gates.protocol import calibrate_tau
        from donor_gates.spin_model import HyperfineModel, SpinPairParams

        preset = load_preset("shuttle_schedules - Standard")
        params = SpinPairParams(100.0, HyperfineModel())
        schedule = build_schedule(6.0, 2.0, preset["t_ramp_ns"], 0.0, preset["dt_ns"])
        return params, schedule, calibrate_tau(params, schedule)

    @pytest.fixture(scope="class")
    def shift_sweep(self, standard):
        params, schedule, tau = standard
        return sweep_shift(params, schedule, tau, ["static", "alternating"], ACCEPTANCE_DELTAS)

    @staticmethod
    def responding(sweep, kind):
        """在最大 ΔE 处高于数值零点的相位通道"""
        labels = [label for label in channel_labels(3)
                  if sweep.probability(kind, ACCEPTANCE_DELTAS[-1], label) > RESPONSE_FLOOR]
        assert labels
        return labels

    def test_noiseless_leakage(self, shift_sweep):
        assert shift_sweep.adiabatic
        assert shift_sweep.probability("static", 0.03, LEAKAGE_CHANNEL) < 1e-6

    def test_static_slopes(self, shift_sweep):
        labels = self.responding(shift_sweep, "static")
        assert {"ZIZ", "IZZ"} <= set(labels)
        for label in labels:
            assert shift_sweep.slopes[("static", label)] >= 3.5, label

    def test_alternating_slopes(self, shift_sweep):
        for label in self.responding(shift_sweep, "alternating"):
            assert shift_sweep.slopes[("alternating", label)] <= 2.5, label

    def test_transit_channels_cancel(self, shift_sweep):
        # 静态偏移下 a / g 渡越相位完全抵消
        for delta in ACCEPTANCE_DELTAS:
            assert shift_sweep.probability("static", delta, TRANSIT_CHANNEL) < 1e-8
            assert shift_sweep.probability("static", delta, "IIZ") < 1e-8

    def test_refocusing_beats_alternating(self, shift_sweep):
        for delta in ACCEPTANCE_DELTAS:
            static = max(shift_sweep.probability("static", delta, label) for label in channel_labels(3))
            alternating = max(shift_sweep.probability("alternating", delta, label) for label in channel_labels(3))
            assert alternating > 1e2 * static
            assert (shift_sweep.probability("alternating", delta, "ZIZ")
                    > 1e2 * shift_sweep.probability("static", delta, "ZIZ"))

    def test_sudden_shuttle_limit(self, standard):
        from donor_gates.spin_model import eigensystem

        params = standard[0]
        sweep = sweep_shuttle_time(params, 6.0, 2.0, [0.001, 10.0])
        sudden = math.sin(eigensystem(params, 117.0).mixing_angle) ** 2
        assert sweep.rows[0].flip_flop_probability == pytest.approx(sudden, rel=0.02)
        assert sweep.rows[1].flip_flop_probability < 1e-8
