"""Bell-state construction, Bell-basis measurement, and the local Pauli set.

The four outcomes are ordered (psi-, psi+, phi-, phi+) everywhere: in
probability vectors, transcripts, and derived tables.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .states import ALGEBRA_ATOL, LabelError, PureState, StateError, apply_one_qubit

_S2 = 1.0 / np.sqrt(2.0)


class BellOutcome(enum.Enum):
    """One of the four Bell-basis results, carrying bit value V and parity P."""

    PSI_MINUS = "psi-"
    PSI_PLUS = "psi+"
    PHI_MINUS = "phi-"
    PHI_PLUS = "phi+"

    @property
    def bit_value(self) -> int:
        """1 for anti-parallel (psi) outcomes, 0 for parallel (phi)."""
        return 1 if self in (BellOutcome.PSI_MINUS, BellOutcome.PSI_PLUS) else 0

    @property
    def parity(self) -> int:
        """+1 for the '+' superscript, -1 for '-'."""
        return -1 if self in (BellOutcome.PSI_MINUS, BellOutcome.PHI_MINUS) else 1

    @classmethod
    def from_bits(cls, bit_value: int, parity: int) -> "BellOutcome":
        for k in cls:
            if k.bit_value == bit_value and k.parity == parity:
                return k
        raise ValueError(f"no Bell outcome with V={bit_value}, P={parity:+d}")

    def __str__(self) -> str:
        return self.value


BELL_ORDER = (
    BellOutcome.PSI_MINUS,
    BellOutcome.PSI_PLUS,
    BellOutcome.PHI_MINUS,
    BellOutcome.PHI_PLUS,
)

# Rows follow BELL_ORDER; columns index the two-qubit computational basis.
_BELL_MATRIX = np.array(
    [
        [0, _S2, -_S2, 0],   # (|01> - |10>)/sqrt(2)
        [0, _S2, _S2, 0],    # (|01> + |10>)/sqrt(2)
        [_S2, 0, 0, -_S2],   # (|00> - |11>)/sqrt(2)
        [_S2, 0, 0, _S2],    # (|00> + |11>)/sqrt(2)
    ],
    dtype=complex,
)


class PauliOp(enum.Enum):
    """The four local correction operations.

    U0 = I, U1 = |0><0| - |1><1|, U2 = |1><0| + |0><1|,
    U3 = |0><1| - |1><0|.
    """

    U0 = 0
    U1 = 1
    U2 = 2
    U3 = 3

    @property
    def matrix(self) -> np.ndarray:
        return _PAULI_MATRICES[self.value]

    def __str__(self) -> str:
        return self.name


_PAULI_MATRICES = (
    np.eye(2, dtype=complex),
    np.diag([1.0, -1.0]).astype(complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, 1], [-1, 0]], dtype=complex),
)

PAULI_PAIRS = tuple((pi, pj) for pi in PauliOp for pj in PauliOp)


@dataclass
class Rng:
    """Deterministic generator with a recorded per-call draw index.

    Identical seeds reproduce identical call sequences. Parallel trials must
    each use an independent generator from :meth:`for_trial`.
    """

    seed: int

    def __post_init__(self):
        self.seed = int(self.seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))
        self.draws = 0

    @classmethod
    def for_trial(cls, master_seed: int, trial_index: int) -> "Rng":
        derived = np.random.SeedSequence((int(master_seed), int(trial_index)))
        return cls(int(derived.generate_state(1, np.uint64)[0]))

    def uniform(self) -> float:
        self.draws += 1
        return float(self._gen.random())

    def normal(self, size: int) -> np.ndarray:
        self.draws += 1
        return self._gen.normal(size=size)

    def choice(self, probs: np.ndarray) -> int:
        """Sample an index from a probability vector with one uniform draw."""
        u = self.uniform() * float(probs.sum())
        acc = 0.0
        last = len(probs) - 1
        for k, p in enumerate(probs.tolist()):
            acc += p
            if u < acc:
                return k
        return last


def bell_state(kind: BellOutcome, la: str, lb: str) -> PureState:
    """The two-qubit Bell state |kind> on labels (la, lb)."""
    if la == lb:
        raise LabelError("Bell pair needs two distinct labels")
    return PureState((la, lb), _BELL_MATRIX[BELL_ORDER.index(kind)])


def epr_pair(la: str, lb: str) -> PureState:
    """The shared resource pair used by the protocols: |psi->."""
    return bell_state(BellOutcome.PSI_MINUS, la, lb)


_BELL_CONJ = _BELL_MATRIX.conj()


def _bell_components(state: PureState, la: str, lb: str) -> tuple[np.ndarray, tuple[str, ...]]:
    """Contract the pair (la, lb) against all four Bell bras at once.

    Returns the (4, 2, ..., 2) array of unnormalized post-measurement
    amplitudes (rows follow BELL_ORDER) and the surviving labels.
    """
    if la == lb:
        raise LabelError("measurement pair needs two distinct labels")
    i, j = state.axis(la), state.axis(lb)
    n = state.n_qubits
    order = (i, j) + tuple(k for k in range(n) if k != i and k != j)
    moved = state.amps.transpose(order).reshape(4, -1)
    comps = (_BELL_CONJ @ moved).reshape((4,) + (2,) * (n - 2))
    rest = tuple(l for l in state.labels if l not in (la, lb))
    return comps, rest


def _component_probs(comps: np.ndarray) -> np.ndarray:
    flat = comps.reshape(4, -1)
    return np.einsum("ij,ij->i", flat, flat.conj()).real


def bell_probabilities(state: PureState, la: str, lb: str) -> np.ndarray:
    """Probabilities of the four Bell outcomes on (la, lb), in BELL_ORDER."""
    comps, _ = _bell_components(state, la, lb)
    return _component_probs(comps)


def bell_project(
    state: PureState,
    la: str,
    lb: str,
    outcome: BellOutcome,
    normalize: bool = True,
) -> tuple[float, PureState]:
    """Project (la, lb) onto one Bell outcome and drop the measured pair.

    Returns (probability, post-state). With ``normalize=False`` the post
    state keeps its raw projection amplitudes, which is what branch-by-branch
    expansion audits need.
    """
    comps, rest = _bell_components(state, la, lb)
    k = BELL_ORDER.index(outcome)
    # Slicing a (4,) comps array yields a scalar once the register empties.
    raw = np.asarray(comps[k]).reshape((2,) * len(rest))
    prob = float(np.vdot(raw, raw).real)
    if not normalize:
        return prob, PureState(rest, raw.copy())
    if prob <= 1e-300:
        raise StateError(f"outcome {outcome} has zero probability on ({la},{lb})")
    return prob, PureState._owned(rest, raw / np.sqrt(prob))


def bell_measure(state: PureState, la: str, lb: str, rng: Rng) -> tuple[BellOutcome, PureState, int]:
    """Sample a Bell measurement on (la, lb); the pair leaves the register.

    Returns (outcome, post-state, draw index of the sample). Deterministic
    given the rng seed and call sequence.
    """
    comps, rest = _bell_components(state, la, lb)
    probs = _component_probs(comps)
    if probs.sum() < 1e-12:
        raise StateError("all Bell outcome probabilities vanish: corrupted state")
    draw_index = rng.draws
    k = rng.choice(probs)
    post = np.asarray(comps[k] / np.sqrt(probs[k])).reshape((2,) * len(rest))
    return BELL_ORDER[k], PureState._owned(rest, post), draw_index


def apply_pauli_pair(
    state: PureState, op_i: PauliOp, l_i: str, op_j: PauliOp, l_j: str
) -> PureState:
    """Apply op_i on qubit l_i and op_j on qubit l_j."""
    if l_i == l_j:
        raise LabelError("correction targets must be distinct")
    out = apply_one_qubit(state, l_i, op_i.matrix)
    return apply_one_qubit(out, l_j, op_j.matrix)


def states_equal_up_to_phase(s1: PureState, s2: PureState, atol: float = ALGEBRA_ATOL) -> bool:
    from .states import fidelity_pure

    return bool(abs(fidelity_pure(s1, s2) - 1.0) <= atol)
