"""Dense pure-state linear algebra over labeled qubit registers.

States are immutable values: every operation returns a new state, so callers
can keep pre/post snapshots of a protocol run without defensive copying.
Convention: |0> = (1, 0), |1> = (0, 1); the leftmost label is the most
significant bit of the amplitude index, so |01>_ab means a=0, b=1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Normalization acceptance for externally supplied states.
NORM_ATOL = 1e-9
# Internal algebraic identities (unitarity, trace, hermiticity).
ALGEBRA_ATOL = 1e-10

# Dense vectors stay under a few hundred MB at this size.
MAX_QUBITS = 24


class LabelError(ValueError):
    """Raised for duplicate, unknown, or malformed qubit labels."""


class StateError(ValueError):
    """Raised for non-normalized, non-finite, or mis-sized amplitude data."""


def _as_amp_tensor(amps, n: int) -> np.ndarray:
    arr = np.asarray(amps, dtype=complex)
    if arr.size != 2**n:
        raise StateError(f"expected 2^{n} amplitudes, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise StateError("amplitudes must be finite")
    arr = arr.reshape((2,) * n).copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PureState:
    """A labeled multi-qubit pure state.

    ``labels`` fixes the tensor order; ``amps`` is the amplitude tensor with
    one axis of length 2 per label, stored read-only.
    """

    labels: tuple[str, ...]
    amps: np.ndarray

    def __init__(self, labels, amps):
        labels = tuple(str(l) for l in labels)
        if len(set(labels)) != len(labels):
            raise LabelError(f"duplicate labels in {labels}")
        if len(labels) > MAX_QUBITS:
            raise LabelError(f"register of {len(labels)} qubits exceeds cap of {MAX_QUBITS}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "amps", _as_amp_tensor(amps, len(labels)))

    @classmethod
    def _owned(cls, labels: tuple[str, ...], amps: np.ndarray) -> "PureState":
        """Wrap a freshly allocated, correctly shaped amplitude tensor.

        Internal fast path: skips validation, so callers must guarantee the
        array is complex, shaped (2,)*len(labels), finite, and not aliased
        anywhere writable.
        """
        obj = object.__new__(cls)
        amps.flags.writeable = False
        object.__setattr__(obj, "labels", labels)
        object.__setattr__(obj, "amps", amps)
        return obj

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    @property
    def vector(self) -> np.ndarray:
        """Flat amplitude vector of length 2^n."""
        return self.amps.reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def axis(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"label {label!r} not in register {self.labels}") from None

    def probabilities(self) -> np.ndarray:
        return np.abs(self.vector) ** 2

    def require_normalized(self, atol: float = NORM_ATOL) -> "PureState":
        if abs(self.norm() - 1.0) > atol:
            raise StateError(f"state norm {self.norm():.12g} deviates from 1 beyond {atol}")
        return self

    def __repr__(self) -> str:
        return f"PureState(labels={self.labels}, dim={2 ** self.n_qubits})"


@dataclass(frozen=True)
class DensityMatrix:
    """Reduced density operator over a labeled subset of qubits."""

    labels: tuple[str, ...]
    matrix: np.ndarray

    def __init__(self, labels, matrix):
        labels = tuple(str(l) for l in labels)
        if len(set(labels)) != len(labels):
            raise LabelError(f"duplicate labels in {labels}")
        mat = np.asarray(matrix, dtype=complex)
        dim = 2 ** len(labels)
        if mat.shape != (dim, dim):
            raise StateError(f"expected {dim}x{dim} matrix, got {mat.shape}")
        if np.max(np.abs(mat - mat.conj().T)) > ALGEBRA_ATOL:
            raise StateError("density matrix is not Hermitian within tolerance")
        if abs(np.trace(mat).real - 1.0) > ALGEBRA_ATOL:
            raise StateError("density matrix trace deviates from 1")
        mat = mat.copy()
        mat.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "matrix", mat)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def max_deviation_from_mixed(self) -> float:
        """Largest entrywise distance from the maximally mixed state I/d."""
        dim = self.matrix.shape[0]
        return float(np.max(np.abs(self.matrix - np.eye(dim) / dim)))


def basis_state(labels, bits: str) -> PureState:
    """Computational basis state, e.g. basis_state(("a", "b"), "01")."""
    labels = tuple(labels)
    if len(bits) != len(labels):
        raise LabelError("bit string length must match label count")
    amps = np.zeros(2 ** len(labels), dtype=complex)
    amps[int(bits, 2)] = 1.0
    return PureState(labels, amps)


def tensor_product(s1: PureState, s2: PureState) -> PureState:
    """Kronecker product; the result carries labels(s1) ++ labels(s2)."""
    overlap = set(s1.labels) & set(s2.labels)
    if overlap:
        raise LabelError(f"label sets overlap: {sorted(overlap)}")
    if s1.n_qubits + s2.n_qubits > MAX_QUBITS:
        raise LabelError("combined register exceeds the qubit cap")
    amps = (s1.vector[:, None] * s2.vector[None, :]).reshape(s1.amps.shape + s2.amps.shape)
    return PureState._owned(s1.labels + s2.labels, amps)


def apply_one_qubit(state: PureState, target: str, op: np.ndarray) -> PureState:
    """Apply a 2x2 unitary on one qubit, identity elsewhere."""
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise StateError("operator must be 2x2")
    if np.max(np.abs(op @ op.conj().T - np.eye(2))) > ALGEBRA_ATOL:
        raise StateError("operator is not unitary within tolerance")
    ax = state.axis(target)
    # Contract the operator onto the target axis, then restore axis order.
    moved = np.moveaxis(state.amps, ax, 0)
    amps = (op @ moved.reshape(2, -1)).reshape(moved.shape)
    return PureState._owned(state.labels, np.moveaxis(amps, 0, ax))


def reorder_labels(state: PureState, new_order) -> PureState:
    """Permute the tensor axes; the physical state is unchanged."""
    new_order = tuple(str(l) for l in new_order)
    if sorted(new_order) != sorted(state.labels):
        raise LabelError(f"{new_order} is not a permutation of {state.labels}")
    perm = [state.axis(l) for l in new_order]
    return PureState._owned(new_order, np.transpose(state.amps, perm))


def fidelity_pure(s1: PureState, s2: PureState) -> float:
    """|<s1|s2>|^2; insensitive to global phase of either input."""
    if s1.labels != s2.labels:
        raise LabelError(f"label mismatch: {s1.labels} vs {s2.labels}")
    f = abs(np.vdot(s1.vector, s2.vector)) ** 2
    return float(min(f, 1.0))


def partial_trace(state: PureState, keep) -> DensityMatrix:
    """Reduced density matrix over ``keep``, in the order given."""
    keep = tuple(str(l) for l in keep)
    if not keep:
        raise LabelError("keep set must be nonempty")
    if len(set(keep)) != len(keep):
        raise LabelError("keep set has duplicates")
    missing = [l for l in keep if l not in state.labels]
    if missing:
        raise LabelError(f"labels {missing} not in register {state.labels}")
    traced = [l for l in state.labels if l not in keep]
    arranged = reorder_labels(state, keep + tuple(traced))
    m = arranged.amps.reshape(2 ** len(keep), -1)
    rho = m @ m.conj().T
    # Numerical cleanup keeps the constructor's hermiticity check honest.
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(keep, rho)
