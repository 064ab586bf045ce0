"""
门代数测试: 对角门记账、ZZC 分解、X 共轭、双循环与复合门恒等式、普适性线路

所有随机参数使用固定种子
"""

import math

import numpy as np
import pytest

from donor_gates.gate_algebra import (
    CZ, H, X, CycleParams, DiagonalGate, PureState, build_zzc, canonicalize, composite_ideal,
    compose, controlled_phase, double_cycle_net, embed_diagonal, embed_operator, extract_zzc,
    fold_sequence, from_phase_polynomial, identity_suite, mask_qubits, measure, phase_distance,
    phase_polynomial, simulate_circuit, single_qubit_z, symmetric_form, unitary_distance,
    verify_universality, wrap_phase, x_conjugate, x_string_matrix,
)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


def dense_zzc(a, b, c):
    z = lambda t: np.diag([1.0, np.exp(1j * t)])
    return np.kron(z(a), z(b)) @ np.diag([1, 1, 1, np.exp(1j * c)])


# ═══════════════════════════════════════════════════════════════════════════
# 相位工具
# ═══════════════════════════════════════════════════════════════════════════

class TestPhaseHelpers:

    def test_wrap_phase_range(self):
        values = np.linspace(-20, 20, 401)
        wrapped = wrap_phase(values)
        assert np.all(wrapped > -math.pi) and np.all(wrapped <= math.pi)
        np.testing.assert_allclose(np.exp(1j * wrapped), np.exp(1j * values), atol=1e-12)

    def test_wrap_phase_boundary(self):
        assert wrap_phase(math.pi) == pytest.approx(math.pi)
        assert wrap_phase(-math.pi) == pytest.approx(math.pi)
        assert isinstance(wrap_phase(0.3), float)

    def test_phase_distance_is_mod_two_pi(self):
        assert phase_distance(0.1, 0.1 + 2 * math.pi) == pytest.approx(0.0, abs=1e-12)
        assert phase_distance(math.pi - 0.1, -math.pi + 0.1) == pytest.approx(0.2)

    def test_unitary_distance_ignores_global_phase(self):
        u = dense_zzc(0.3, -0.7, 1.1)
        assert unitary_distance(np.exp(0.4j) * u, u) < 1e-14
        assert unitary_distance(u, np.eye(4)) > 0.1


# ═══════════════════════════════════════════════════════════════════════════
# 对角门
# ═══════════════════════════════════════════════════════════════════════════

class TestDiagonalGate:

    def test_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            DiagonalGate(2, (0.0, 0.0, 0.0))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            DiagonalGate(1, (0.0, float("nan")))

    def test_canonical_form(self):
        g = canonicalize(DiagonalGate(2, (1.0, 2.0, 3.0, 10.0)))
        assert g.phases[0] == 0.0
        assert all(-math.pi < p <= math.pi for p in g.phases)

    def test_canonicalize_is_idempotent(self, rng):
        g = DiagonalGate(3, tuple(rng.uniform(-9, 9, 8)))
        once = canonicalize(g)
        np.testing.assert_allclose(canonicalize(once).as_array(), once.as_array(), atol=1e-14)

    def test_compose_matches_matrix_product(self, rng):
        g = DiagonalGate(2, tuple(rng.uniform(-5, 5, 4)))
        h = DiagonalGate(2, tuple(rng.uniform(-5, 5, 4)))
        assert unitary_distance(compose(g, h).matrix(), g.matrix() @ h.matrix()) < 1e-12

    def test_compose_rejects_mismatched_sizes(self):
        with pytest.raises(ValueError):
            compose(DiagonalGate.identity(1), DiagonalGate.identity(2))

    def test_is_close_modulo_two_pi(self):
        g = DiagonalGate(1, (0.5, 1.0))
        h = DiagonalGate(1, (0.5 + 2 * math.pi, 1.0 - 4 * math.pi))
        assert g.is_close(h)


# ═══════════════════════════════════════════════════════════════════════════
# ZZC 分解
# ═══════════════════════════════════════════════════════════════════════════

class TestZZC:

    def test_build_matches_dense(self):
        a, b, c = 0.4, -1.3, 2.2
        assert unitary_distance(build_zzc(a, b, c).matrix(), dense_zzc(a, b, c)) < 1e-14

    def test_extract_roundtrip(self, rng):
        for a, b, c in rng.uniform(-math.pi, math.pi, size=(50, 3)):
            got = extract_zzc(build_zzc(a, b, c))
            for x, y in zip(got, (a, b, c)):
                assert phase_distance(x, y) < 1e-12

    def test_extract_requires_two_qubits(self):
        with pytest.raises(ValueError):
            extract_zzc(DiagonalGate.identity(3))

    def test_cz_pi(self):
        assert extract_zzc(controlled_phase(math.pi, 0, 1, 2)) == pytest.approx((0.0, 0.0, math.pi))

    def test_symmetric_form_mapping(self):
        alpha, beta, gamma = 0.2, -0.5, 0.9
        a, b, c = extract_zzc(symmetric_form(alpha, beta, gamma))
        assert phase_distance(a, gamma - alpha) < 1e-12
        assert phase_distance(b, beta - alpha) < 1e-12
        assert phase_distance(c, -2 * (beta + gamma)) < 1e-12

    def test_single_qubit_z_on_ancilla(self):
        # 第 0 条线为 ancilla (最高位)
        assert extract_zzc(single_qubit_z(0.7, 0, 2)) == pytest.approx((0.7, 0.0, 0.0))
        assert extract_zzc(single_qubit_z(0.7, 1, 2)) == pytest.approx((0.0, 0.7, 0.0))


# ═══════════════════════════════════════════════════════════════════════════
# X 共轭与时序折叠
# ═══════════════════════════════════════════════════════════════════════════

class TestConjugationAndFolding:

    def test_x_conjugate_matches_dense(self, rng):
        g = DiagonalGate(2, tuple(rng.uniform(-3, 3, 4)))
        for qubit in (0, 1):
            x = embed_operator(PAULI_X, (qubit,), 2)
            assert unitary_distance(x_conjugate(g, qubit).matrix(), x @ g.matrix() @ x) < 1e-12

    def test_x_conjugate_zzc_rule(self):
        # X_anc · Z_a⊗Z_b·CZ_c · X_anc = Z_{-a} ⊗ Z_{b+c} · CZ_{-c}
        a, b, c = 0.3, 0.8, -1.1
        got = x_conjugate(build_zzc(a, b, c), 0)
        assert got.is_close(build_zzc(-a, b + c, -c))

    def test_x_conjugate_bad_qubit(self):
        with pytest.raises(IndexError):
            x_conjugate(DiagonalGate.identity(2), 2)

    def test_fold_sequence_matches_matrix_chain(self, rng):
        g1 = DiagonalGate(3, tuple(rng.uniform(-3, 3, 8)))
        g2 = DiagonalGate(3, tuple(rng.uniform(-3, 3, 8)))
        net, mask = fold_sequence(3, [g1, ("X", 0), g2, ("X", 2)])
        chain = (embed_operator(PAULI_X, (2,), 3) @ g2.matrix()
                 @ embed_operator(PAULI_X, (0,), 3) @ g1.matrix())
        assert mask_qubits(mask, 3) == (0, 2)
        assert unitary_distance(x_string_matrix(mask, 3) @ net.matrix(), chain) < 1e-12

    def test_fold_sequence_rejects_other_gates(self):
        with pytest.raises(ValueError):
            fold_sequence(1, [("H", 0)])

    def test_embed_diagonal_matches_embed_operator(self):
        g = build_zzc(0.3, -0.2, 1.0)
        for targets in ((0, 2), (2, 0), (1, 2)):
            dense = embed_operator(g.matrix(), targets, 3)
            assert unitary_distance(embed_diagonal(g, targets, 3).matrix(), dense) < 1e-12


# ═══════════════════════════════════════════════════════════════════════════
# 相位多项式
# ═══════════════════════════════════════════════════════════════════════════

class TestPhasePolynomial:

    def test_two_qubit_terms_match_zzc(self):
        terms = phase_polynomial(build_zzc(0.1, 0.2, 0.3))
        assert terms[(0,)] == pytest.approx(0.1)
        assert terms[(1,)] == pytest.approx(0.2)
        assert terms[(0, 1)] == pytest.approx(0.3)

    def test_roundtrip_three_qubits(self, rng):
        g = DiagonalGate(3, tuple(rng.uniform(-3, 3, 8)))
        assert from_phase_polynomial(3, phase_polynomial(g)).is_close(g, atol=1e-12)

    def test_cz_pair_has_no_three_body_term(self):
        g = compose(controlled_phase(math.pi, 0, 2, 3), controlled_phase(math.pi, 1, 2, 3))
        terms = phase_polynomial(g)
        assert phase_distance(terms[(0, 1, 2)], 0.0) < 1e-12
        assert phase_distance(terms[(0, 2)], math.pi) < 1e-12
        assert phase_distance(terms[(1, 2)], math.pi) < 1e-12


# ═══════════════════════════════════════════════════════════════════════════
# 循环、双循环、复合门
# ═══════════════════════════════════════════════════════════════════════════

class TestCycles:

    def test_cycle_params_validation(self):
        with pytest.raises(ValueError):
            CycleParams(0, 0, 0, 0, 0, 0, tau=-1.0)
        with pytest.raises(ValueError):
            CycleParams(float("inf"), 0, 0, 0, 0, 0, tau=1.0)

    def test_from_stages_adds_transits(self):
        cycle = CycleParams.from_stages((0.1, 0.2, 0.3), (1.0, 2.0, 3.0), (0.4, 0.5, 0.6), tau=2.0)
        assert (cycle.a, cycle.b, cycle.c) == pytest.approx((0.5, 0.7, 0.9))
        assert (cycle.d, cycle.e, cycle.f) == (1.0, 2.0, 3.0)

    def test_double_cycle_result(self):
        a, b, c, d, e = 0.3, -0.4, 0.9, 1.2, -0.6
        net = double_cycle_net(CycleParams(a, b, c, d, e, math.pi, 1.0),
                               CycleParams(a, b, c, 0.0, 0.0, 0.0, 0.0))
        assert net.ancilla_flip
        assert phase_distance(net.ancilla_phase, d) < 1e-12
        assert phase_distance(net.data_phase, 2 * b + c + e) < 1e-12
        assert phase_distance(net.conditional_phase, math.pi) < 1e-12

    def test_double_cycle_independent_of_transit_a(self):
        nets = [double_cycle_net(CycleParams(a, 0.2, 0.5, 0.7, 0.1, math.pi, 1.0),
                                 CycleParams(a, 0.2, 0.5, 0.0, 0.0, 0.0, 0.0)) for a in (-2.0, 0.0, 1.3)]
        for net in nets[1:]:
            assert net.diagonal.is_close(nets[0].diagonal)

    def test_composite_entangling_is_cz_pair(self):
        first = CycleParams(0.3, 0.2, 0.5, 0.7, 0.1, math.pi, 1.0)
        second = CycleParams(0.3, 0.2, 0.5, 0.0, 0.0, 0.0, 0.0)
        net = double_cycle_net(first, second)
        decomposition = composite_ideal(net, net)
        cz_cz = compose(controlled_phase(math.pi, 0, 2, 3), controlled_phase(math.pi, 1, 2, 3))
        assert decomposition.entangling.is_close(cz_cz, atol=1e-12)
        assert decomposition.x_flips == (0, 1, 2)
        # data 上 g - g 抵消
        assert phase_distance(decomposition.single_phases[2], 0.0) < 1e-12

    def test_composite_idle_phases_land_on_ancillas(self):
        net = double_cycle_net(CycleParams(0, 0, 0, 0, 0, math.pi, 1.0), CycleParams(0, 0, 0, 0, 0, 0, 0))
        base = composite_ideal(net, net)
        idle = composite_ideal(net, net, idle_phases=(0.4, -0.9))
        delta = np.subtract(idle.single_phases, base.single_phases)
        # ancilla1 的空闲 Z 在 X 之后, 折叠后反号
        assert phase_distance(delta[0], -0.4) < 1e-12
        assert phase_distance(delta[1], -0.9) < 1e-12
        assert phase_distance(delta[2], 0.0) < 1e-12


# ═══════════════════════════════════════════════════════════════════════════
# 恒等式自检
# ═══════════════════════════════════════════════════════════════════════════

class TestIdentitySuite:

    def test_all_identities_pass(self, rng):
        report = identity_suite(rng, samples=300)
        for name, err in report.items():
            assert err < 1e-9, name

    def test_deterministic_with_seed(self):
        first = identity_suite(np.random.default_rng(7), samples=50)
        second = identity_suite(np.random.default_rng(7), samples=50)
        assert first == second

    def test_broken_convention_is_detected(self, rng):
        report = identity_suite(rng, samples=50, conjugate=lambda g, mask: canonicalize(g))
        assert report["x_conjugate"] > 1e-3
        assert report["double_cycle"] > 1e-3


# ═══════════════════════════════════════════════════════════════════════════
# 纯态线路模拟与普适性
# ═══════════════════════════════════════════════════════════════════════════

class TestCircuitSimulation:

    def test_unnormalized_state_rejected(self):
        with pytest.raises(ValueError):
            PureState(1, np.array([1.0, 1.0]))

    def test_bell_state_measurement(self):
        branches = simulate_circuit(PureState.basis(2, 0), [H(0), X(1), CZ(0, 1), H(1), measure(0)])
        assert [b.outcomes for b in branches] == [(0,), (1,)]
        np.testing.assert_allclose([b.probability for b in branches], [0.5, 0.5], atol=1e-14)

    def test_zero_probability_branch_has_no_state(self):
        branches = simulate_circuit(PureState.basis(1, 0), [measure(0)])
        assert branches[0].probability == pytest.approx(1.0)
        assert branches[1].probability == 0.0 and branches[1].state is None

    def test_cz_twice_is_identity(self, rng):
        amps = rng.normal(size=4) + 1j * rng.normal(size=4)
        state = PureState(2, amps / np.linalg.norm(amps))
        out = simulate_circuit(state, [CZ(0, 1), CZ(0, 1)])[0].state
        np.testing.assert_allclose(out.amplitudes, state.amplitudes, atol=1e-14)

    def test_cz_same_qubit_rejected(self):
        with pytest.raises(ValueError):
            simulate_circuit(PureState.basis(2, 0), [CZ(1, 1)])

    def test_discard_entangled_qubit_rejected(self):
        bell = PureState(2, np.array([1, 0, 0, 1]) / math.sqrt(2))
        with pytest.raises(ValueError):
            bell.discard(0)

    def test_universality_circuits(self, rng):
        report = verify_universality(rng, n_random=20)
        assert set(report) == {"ancilla_data_cz", "data_data_cz", "indirect_measurement"}
        for name, err in report.items():
            assert err < 1e-12, name
