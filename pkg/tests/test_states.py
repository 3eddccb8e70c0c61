import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsts.states import (
    DensityMatrix,
    LabelError,
    PureState,
    StateError,
    apply_one_qubit,
    basis_state,
    fidelity_pure,
    partial_trace,
    reorder_labels,
    tensor_product,
)
from qsts.bell import BellOutcome, PauliOp, bell_state, epr_pair

from conftest import ORACLE_BELL, kron_chain, oracle_project_pair, random_secret_coeffs


def state_from(labels, vec):
    return PureState(labels, np.asarray(vec, dtype=complex))


class TestPureState:
    def test_duplicate_labels_rejected(self):
        with pytest.raises(LabelError):
            PureState(("a", "a"), np.zeros(4))

    def test_size_mismatch_rejected(self):
        with pytest.raises(StateError):
            PureState(("a", "b"), np.zeros(8))

    def test_non_finite_rejected(self):
        with pytest.raises(StateError):
            PureState(("a",), [np.nan, 0.0])

    def test_amplitudes_read_only(self):
        s = basis_state(("a", "b"), "01")
        with pytest.raises(ValueError):
            s.amps[0, 0] = 1.0

    def test_register_cap(self):
        with pytest.raises(LabelError):
            PureState([str(i) for i in range(25)], np.zeros(2**25))


class TestTensorProduct:
    def test_basis_states(self):
        out = tensor_product(basis_state(("a",), "0"), basis_state(("b",), "1"))
        assert out.labels == ("a", "b")
        np.testing.assert_array_equal(out.vector, [0, 1, 0, 0])

    def test_two_singlets_match_kron_oracle(self):
        # The pair that later splits into the agents' channel: all four
        # nonzero amplitudes must come out exactly +-1/2.
        out = tensor_product(epr_pair("1", "2"), epr_pair("7", "8"))
        expected = kron_chain(ORACLE_BELL["psi-"], ORACLE_BELL["psi-"])
        np.testing.assert_allclose(out.vector, expected, atol=1e-15)
        nonzero = out.vector[np.abs(out.vector) > 0]
        assert sorted(np.round(nonzero.real, 12)) == [-0.5, -0.5, 0.5, 0.5]

    def test_secret_with_two_singlets_matches_kron_oracle(self):
        coeffs = random_secret_coeffs(seed=101)
        s = state_from(("a", "b"), coeffs)
        out = tensor_product(tensor_product(s, epr_pair("3", "4")), epr_pair("5", "6"))
        expected = kron_chain(coeffs, ORACLE_BELL["psi-"], ORACLE_BELL["psi-"])
        np.testing.assert_allclose(out.vector, expected, atol=1e-15)
        mags = np.abs(out.vector[np.abs(out.vector) > 1e-14])
        np.testing.assert_allclose(
            sorted(mags), sorted(np.repeat(np.abs(coeffs), 4) / 2), atol=1e-12
        )

    def test_overlapping_labels_rejected(self):
        with pytest.raises(LabelError):
            tensor_product(basis_state(("a",), "0"), basis_state(("a",), "0"))

    def test_associative_up_to_label_order(self):
        a = state_from(("a",), [0.6, 0.8])
        b = epr_pair("x", "y")
        c = state_from(("c",), [1j * 0.8, 0.6])
        left = tensor_product(tensor_product(a, b), c)
        right = tensor_product(a, tensor_product(b, c))
        assert fidelity_pure(left, reorder_labels(right, left.labels)) == pytest.approx(1.0, abs=1e-12)


class TestApplyOneQubit:
    def test_u2_turns_singlet_into_phi_minus(self):
        out = apply_one_qubit(epr_pair("A", "B"), "B", PauliOp.U2.matrix)
        np.testing.assert_allclose(out.vector, ORACLE_BELL["phi-"], atol=1e-15)

    def test_identity_leaves_state(self):
        s = state_from(("a", "b"), random_secret_coeffs(7))
        out = apply_one_qubit(s, "a", PauliOp.U0.matrix)
        np.testing.assert_array_equal(out.vector, s.vector)

    def test_u1_is_an_involution(self):
        s = state_from(("a", "b"), random_secret_coeffs(8))
        out = apply_one_qubit(apply_one_qubit(s, "b", PauliOp.U1.matrix), "b", PauliOp.U1.matrix)
        np.testing.assert_allclose(out.vector, s.vector, atol=1e-15)

    def test_unknown_label_rejected(self):
        with pytest.raises(LabelError):
            apply_one_qubit(epr_pair("a", "b"), "z", PauliOp.U0.matrix)

    def test_non_unitary_rejected(self):
        with pytest.raises(StateError):
            apply_one_qubit(epr_pair("a", "b"), "a", np.array([[1, 0], [0, 2.0]]))

    def test_norm_preserved_under_random_unitaries(self):
        gen = np.random.default_rng(42)
        s = state_from(("a", "b", "c"), gen.normal(size=8) + 1j * gen.normal(size=8))
        s = state_from(("a", "b", "c"), s.vector / s.norm())
        for _ in range(30):
            m = gen.normal(size=(2, 2)) + 1j * gen.normal(size=(2, 2))
            q, _ = np.linalg.qr(m)
            target = gen.choice(["a", "b", "c"])
            s = apply_one_qubit(s, target, q)
            assert abs(s.norm() - 1.0) < 1e-10


class TestReorderLabels:
    def test_two_qubit_swap(self):
        out = reorder_labels(basis_state(("a", "b"), "01"), ("b", "a"))
        assert out.labels == ("b", "a")
        np.testing.assert_array_equal(out.vector, [0, 0, 1, 0])

    def test_round_trip(self):
        s = state_from(("a", "b", "c"), random_secret_coeffs(3).repeat(2) / np.sqrt(2))
        back = reorder_labels(reorder_labels(s, ("c", "a", "b")), ("a", "b", "c"))
        np.testing.assert_allclose(back.vector, s.vector, atol=1e-15)

    def test_four_qubit_reorder_matches_direct_construction(self):
        # Oracle: rebuild the same product in the target order with kron.
        pair_28 = ORACLE_BELL["psi-"]
        coeffs = random_secret_coeffs(11)
        joint = tensor_product(
            PureState(("2", "8"), pair_28), PureState(("4", "6"), coeffs)
        )
        out = reorder_labels(joint, ("8", "6", "2", "4"))
        # (8,6,2,4): amplitude of |w x y z> = pair[y w] * coeffs[z x]
        expected = np.zeros(16, dtype=complex)
        pair_m = pair_28.reshape(2, 2)
        coeff_m = coeffs.reshape(2, 2)
        for w in range(2):
            for x in range(2):
                for y in range(2):
                    for z in range(2):
                        expected[w * 8 + x * 4 + y * 2 + z] = pair_m[y, w] * coeff_m[z, x]
        np.testing.assert_allclose(out.vector, expected, atol=1e-15)

    def test_not_a_permutation_rejected(self):
        with pytest.raises(LabelError):
            reorder_labels(basis_state(("a", "b"), "00"), ("a", "c"))


class TestFidelity:
    def test_self_fidelity_is_one(self):
        s = state_from(("a", "b"), random_secret_coeffs(5))
        assert fidelity_pure(s, s) == pytest.approx(1.0, abs=1e-14)

    def test_global_phase_is_invisible(self):
        v = random_secret_coeffs(6)
        s1 = state_from(("a", "b"), v)
        for theta in (0.3, np.pi / 2, 1.0, np.pi):
            s2 = state_from(("a", "b"), np.exp(1j * theta) * v)
            assert fidelity_pure(s1, s2) == pytest.approx(1.0, abs=1e-13)

    def test_orthogonal_states(self):
        assert fidelity_pure(basis_state(("a", "b"), "00"), basis_state(("a", "b"), "01")) == 0.0

    def test_label_mismatch_rejected(self):
        with pytest.raises(LabelError):
            fidelity_pure(basis_state(("a",), "0"), basis_state(("b",), "0"))


class TestPartialTrace:
    def test_half_of_a_singlet_is_maximally_mixed(self):
        rho = partial_trace(epr_pair("A", "B"), ("A",))
        np.testing.assert_allclose(rho.matrix, np.eye(2) / 2, atol=1e-15)

    def test_product_state_marginal(self):
        rho = partial_trace(basis_state(("A", "B"), "00"), ("A",))
        np.testing.assert_allclose(rho.matrix, [[1, 0], [0, 0]], atol=1e-15)

    def test_channel_qubit_after_sender_measurements(self):
        # Run the four-pair scheme through the sender's measurements with the
        # projector oracle, then check the reduction over qubit 8 is I/2.
        from qsts.protocols import SchemeConfig, Scheme, TwoQubitSecret, build_setup
        from qsts.bell import bell_project

        secret = TwoQubitSecret.from_vector(random_secret_coeffs(21))
        state = build_setup(secret, SchemeConfig(Scheme.FOUR_EPR))
        for pair, kind in [(("a", "3"), BellOutcome.PSI_PLUS),
                           (("b", "5"), BellOutcome.PHI_MINUS),
                           (("1", "7"), BellOutcome.PSI_MINUS)]:
            _, state = bell_project(state, pair[0], pair[1], kind)
        rho = partial_trace(state, ("8",))
        np.testing.assert_allclose(rho.matrix, np.eye(2) / 2, atol=1e-10)

    def test_reductions_are_physical(self):
        gen = np.random.default_rng(9)
        for _ in range(20):
            v = gen.normal(size=16) + 1j * gen.normal(size=16)
            s = state_from(("a", "b", "c", "d"), v / np.linalg.norm(v))
            rho = partial_trace(s, ("b", "d"))
            assert abs(np.trace(rho.matrix).real - 1.0) < 1e-10
            assert np.max(np.abs(rho.matrix - rho.matrix.conj().T)) < 1e-10
            assert rho.eigenvalues().min() > -1e-10

    def test_empty_keep_rejected(self):
        with pytest.raises(LabelError):
            partial_trace(epr_pair("a", "b"), ())

    def test_unknown_keep_rejected(self):
        with pytest.raises(LabelError):
            partial_trace(epr_pair("a", "b"), ("z",))


class TestDensityMatrix:
    def test_non_hermitian_rejected(self):
        with pytest.raises(StateError):
            DensityMatrix(("a",), np.array([[0.5, 0.1], [0.0, 0.5]]))

    def test_wrong_trace_rejected(self):
        with pytest.raises(StateError):
            DensityMatrix(("a",), np.eye(2))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10**9))
def test_fidelity_is_symmetric(seed):
    gen = np.random.default_rng(seed)
    v1 = gen.normal(size=4) + 1j * gen.normal(size=4)
    v2 = gen.normal(size=4) + 1j * gen.normal(size=4)
    s1 = state_from(("a", "b"), v1 / np.linalg.norm(v1))
    s2 = state_from(("a", "b"), v2 / np.linalg.norm(v2))
    assert fidelity_pure(s1, s2) == pytest.approx(fidelity_pure(s2, s1), abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10**9))
def test_fidelity_invariant_under_simultaneous_relabeling(seed):
    gen = np.random.default_rng(seed)
    v1 = gen.normal(size=8) + 1j * gen.normal(size=8)
    v2 = gen.normal(size=8) + 1j * gen.normal(size=8)
    s1 = state_from(("a", "b", "c"), v1 / np.linalg.norm(v1))
    s2 = state_from(("a", "b", "c"), v2 / np.linalg.norm(v2))
    order = list(gen.permutation(["a", "b", "c"]))
    f_before = fidelity_pure(s1, s2)
    f_after = fidelity_pure(reorder_labels(s1, order), reorder_labels(s2, order))
    assert f_before == pytest.approx(f_after, abs=1e-12)
