import itertools

import numpy as np
import pytest

from qsts.bell import (
    BELL_ORDER,
    BellOutcome,
    PauliOp,
    Rng,
    apply_pauli_pair,
    bell_measure,
    bell_probabilities,
    bell_project,
    bell_state,
    epr_pair,
)
from qsts.states import PureState, StateError, fidelity_pure, tensor_product

from conftest import ORACLE_BELL, kron_chain, oracle_project_pair, random_secret_coeffs


def test_bell_state_amplitudes_exact():
    np.testing.assert_array_equal(
        bell_state(BellOutcome.PSI_MINUS, "A", "B").vector, ORACLE_BELL["psi-"]
    )
    np.testing.assert_array_equal(
        bell_state(BellOutcome.PHI_PLUS, "A", "B").vector, ORACLE_BELL["phi+"]
    )
    np.testing.assert_array_equal(
        bell_state(BellOutcome.PSI_PLUS, "A", "B").vector, ORACLE_BELL["psi+"]
    )
    np.testing.assert_array_equal(
        bell_state(BellOutcome.PHI_MINUS, "A", "B").vector, ORACLE_BELL["phi-"]
    )


def test_bell_states_orthonormal():
    for k1 in BELL_ORDER:
        for k2 in BELL_ORDER:
            f = fidelity_pure(bell_state(k1, "A", "B"), bell_state(k2, "A", "B"))
            assert f == pytest.approx(1.0 if k1 == k2 else 0.0, abs=1e-14)


def test_local_operation_identities_amplitude_level():
    # Acting on the second qubit of |psi->: U0 fixes it, U1 sends it to
    # -|psi+>, U2 to |phi->, U3 to |phi+>. Signs included, 1e-12.
    psi_minus = epr_pair("A", "B")
    cases = [
        (PauliOp.U0, ORACLE_BELL["psi-"]),
        (PauliOp.U1, -ORACLE_BELL["psi+"]),
        (PauliOp.U2, ORACLE_BELL["phi-"]),
        (PauliOp.U3, ORACLE_BELL["phi+"]),
    ]
    for op, expected in cases:
        out = apply_pauli_pair(psi_minus, PauliOp.U0, "A", op, "B")
        np.testing.assert_allclose(out.vector, expected, atol=1e-12)


def test_bit_value_parity_bijection():
    seen = set()
    for k in BellOutcome:
        seen.add((k.bit_value, k.parity))
        assert BellOutcome.from_bits(k.bit_value, k.parity) is k
    assert seen == {(0, 1), (0, -1), (1, 1), (1, -1)}
    assert BellOutcome.PSI_MINUS.bit_value == BellOutcome.PSI_PLUS.bit_value == 1
    assert BellOutcome.PHI_MINUS.bit_value == BellOutcome.PHI_PLUS.bit_value == 0
    assert BellOutcome.PSI_PLUS.parity == BellOutcome.PHI_PLUS.parity == 1
    assert BellOutcome.PSI_MINUS.parity == BellOutcome.PHI_MINUS.parity == -1


class TestBellProbabilities:
    def test_eigenstate(self):
        probs = bell_probabilities(epr_pair("A", "B"), "A", "B")
        np.testing.assert_allclose(probs, [1, 0, 0, 0], atol=1e-14)

    def test_setup_state_first_pair_uniform(self):
        # On the six-qubit setup, measuring (a,3) gives each outcome 1/4.
        # Oracle: explicit projector contraction per outcome.
        coeffs = random_secret_coeffs(31)
        labels = ["a", "b", "3", "4", "5", "6"]
        vec = kron_chain(coeffs, ORACLE_BELL["psi-"], ORACLE_BELL["psi-"])
        state = PureState(labels, vec)
        expected = [oracle_project_pair(vec, labels, "a", "3", k)[0] for k in
                    ("psi-", "psi+", "phi-", "phi+")]
        np.testing.assert_allclose(expected, [0.25] * 4, atol=1e-12)
        np.testing.assert_allclose(bell_probabilities(state, "a", "3"), expected, atol=1e-12)

    def test_setup_state_joint_distribution_uniform(self):
        # Sequential oracle: P(k1 on (a,3)) * P(k2 on (b,5) | k1) = 1/16
        # for every combination and any normalized secret.
        for seed in (1, 2, 3):
            coeffs = random_secret_coeffs(seed)
            labels = ["a", "b", "3", "4", "5", "6"]
            vec = kron_chain(coeffs, ORACLE_BELL["psi-"], ORACLE_BELL["psi-"])
            for k1 in ORACLE_BELL:
                p1, rest, rlabels = oracle_project_pair(vec, labels, "a", "3", k1)
                for k2 in ORACLE_BELL:
                    p2, _, _ = oracle_project_pair(rest / np.sqrt(p1), rlabels, "b", "5", k2)
                    assert p1 * p2 == pytest.approx(1 / 16, abs=1e-12)

    def test_probabilities_sum_to_one(self):
        gen = np.random.default_rng(17)
        for _ in range(10):
            v = gen.normal(size=16) + 1j * gen.normal(size=16)
            s = PureState(("p", "q", "r", "s"), v / np.linalg.norm(v))
            assert bell_probabilities(s, "q", "s").sum() == pytest.approx(1.0, abs=1e-10)


class TestBellMeasure:
    def test_eigenstate_certain_outcome_and_empty_register(self):
        kind, post, draw = bell_measure(epr_pair("A", "B"), "A", "B", Rng(0))
        assert kind is BellOutcome.PSI_MINUS
        assert post.labels == ()
        assert draw == 0

    def test_swapping_produces_matching_bell_pair(self):
        # Measuring (1,7) on two singlets leaves (2,8) in a Bell state that
        # mirrors the outcome: psi-/psi-, psi+/psi+, phi-/phi-, phi+/phi+.
        for seed in range(24):
            state = tensor_product(epr_pair("1", "2"), epr_pair("7", "8"))
            kind, post, _ = bell_measure(state, "1", "7", Rng(seed))
            assert post.labels == ("2", "8")
            f = fidelity_pure(post, bell_state(kind, "2", "8"))
            assert f == pytest.approx(1.0, abs=1e-12)

    def test_swapping_outcomes_uniform(self):
        counts = {k: 0 for k in BELL_ORDER}
        for seed in range(400):
            state = tensor_product(epr_pair("1", "2"), epr_pair("7", "8"))
            kind, _, _ = bell_measure(state, "1", "7", Rng(seed))
            counts[kind] += 1
        for k in BELL_ORDER:
            assert 60 < counts[k] < 140

    def test_two_sender_measurements_leave_secret(self):
        coeffs = random_secret_coeffs(77)
        state = tensor_product(
            tensor_product(PureState(("a", "b"), coeffs), epr_pair("3", "4")),
            epr_pair("5", "6"),
        )
        _, state = bell_project(state, "a", "3", BellOutcome.PSI_MINUS)
        _, state = bell_project(state, "b", "5", BellOutcome.PSI_MINUS)
        assert state.labels == ("4", "6")
        assert fidelity_pure(state, PureState(("4", "6"), coeffs)) == pytest.approx(1.0, abs=1e-12)

    def test_completeness_and_orthogonality_before_removal(self):
        gen = np.random.default_rng(5)
        v = gen.normal(size=16) + 1j * gen.normal(size=16)
        state = PureState(("w", "x", "y", "z"), v / np.linalg.norm(v))
        retained = []
        for kind in BELL_ORDER:
            prob, post = bell_project(state, "w", "y", kind, normalize=False)
            retained.append(tensor_product(bell_state(kind, "w", "y"), post))
        for i in range(4):
            for j in range(i + 1, 4):
                overlap = np.vdot(retained[i].vector, retained[j].vector)
                assert abs(overlap) < 1e-12
        total = sum(r.amps for r in retained)
        reassembled = PureState(("w", "y", "x", "z"), total)
        from qsts.states import reorder_labels

        np.testing.assert_allclose(
            reorder_labels(reassembled, ("w", "x", "y", "z")).amps, state.amps, atol=1e-12
        )

    def test_remeasuring_retained_pair_reproduces_outcome(self):
        gen = np.random.default_rng(23)
        v = gen.normal(size=8) + 1j * gen.normal(size=8)
        state = PureState(("p", "q", "r"), v / np.linalg.norm(v))
        kind, post, _ = bell_measure(state, "p", "r", Rng(9))
        diagnostic = tensor_product(bell_state(kind, "p", "r"), post)
        probs = bell_probabilities(diagnostic, "p", "r")
        assert probs[BELL_ORDER.index(kind)] == pytest.approx(1.0, abs=1e-12)

    def test_impossible_branch_rejected(self):
        with pytest.raises(StateError):
            bell_project(epr_pair("A", "B"), "A", "B", BellOutcome.PHI_PLUS)

    def test_determinism_per_seed(self):
        def sequence(seed):
            rng = Rng(seed)
            out = []
            for _ in range(6):
                state = tensor_product(epr_pair("1", "2"), epr_pair("7", "8"))
                kind, _, draw = bell_measure(state, "1", "7", rng)
                out.append((kind, draw))
            return out

        assert sequence(1234) == sequence(1234)
        assert sequence(1234) != sequence(4321)


class TestApplyPauliPair:
    def test_identity_pair(self):
        s = PureState(("8", "6"), random_secret_coeffs(4))
        out = apply_pauli_pair(s, PauliOp.U0, "8", PauliOp.U0, "6")
        np.testing.assert_array_equal(out.vector, s.vector)

    def test_u1_u2_restores_secret(self):
        # Receiver state a|01>+b|00>-g|11>-d|10> on (8,6) needs U1 (x) U2.
        a, b, g, d = random_secret_coeffs(55)
        state = PureState(("8", "6"), [b, a, -d, -g])
        out = apply_pauli_pair(state, PauliOp.U1, "8", PauliOp.U2, "6")
        target = PureState(("8", "6"), [a, b, g, d])
        assert fidelity_pure(out, target) == pytest.approx(1.0, abs=1e-12)

    def test_u2_u0_restores_secret(self):
        # Receiver state a|10>+b|11>+g|00>+d|01> on (8,6) needs U2 (x) U0.
        a, b, g, d = random_secret_coeffs(56)
        state = PureState(("8", "6"), [g, d, a, b])
        out = apply_pauli_pair(state, PauliOp.U2, "8", PauliOp.U0, "6")
        target = PureState(("8", "6"), [a, b, g, d])
        assert fidelity_pure(out, target) == pytest.approx(1.0, abs=1e-12)

    def test_distinct_targets_required(self):
        s = PureState(("8", "6"), random_secret_coeffs(2))
        with pytest.raises(Exception):
            apply_pauli_pair(s, PauliOp.U0, "8", PauliOp.U1, "8")


def test_rng_trial_derivation_is_stable():
    a = Rng.for_trial(99, 0)
    b = Rng.for_trial(99, 0)
    c = Rng.for_trial(99, 1)
    assert a.seed == b.seed != c.seed
    assert a.uniform() == b.uniform()
