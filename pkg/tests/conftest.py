"""Shared oracle helpers, independent of the package under test.

Everything here is plain numpy: explicit Kronecker products and projector
contractions used to compute expected values from first principles.
"""
import numpy as np
import pytest

SQ2 = 1.0 / np.sqrt(2.0)

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)

# Order everywhere: (psi-, psi+, phi-, phi+)
ORACLE_BELL = {
    "psi-": SQ2 * np.array([0, 1, -1, 0], dtype=complex),
    "psi+": SQ2 * np.array([0, 1, 1, 0], dtype=complex),
    "phi-": SQ2 * np.array([1, 0, 0, -1], dtype=complex),
    "phi+": SQ2 * np.array([1, 0, 0, 1], dtype=complex),
}


def kron_chain(*vecs):
    out = np.asarray(vecs[0], dtype=complex)
    for v in vecs[1:]:
        out = np.kron(out, np.asarray(v, dtype=complex))
    return out


def oracle_project_pair(vec, labels, la, lb, kind):
    """Project the flat vector onto a Bell bra on (la, lb), dropping the pair.

    Returns (probability, unnormalized remainder vector, remaining labels).
    """
    labels = list(labels)
    n = len(labels)
    i, j = labels.index(la), labels.index(lb)
    arr = np.asarray(vec, dtype=complex).reshape((2,) * n)
    bra = ORACLE_BELL[kind].conj().reshape(2, 2)
    out = np.zeros((2,) * (n - 2), dtype=complex) if n > 2 else np.zeros((), dtype=complex)
    for bi in range(2):
        for bj in range(2):
            idx = [slice(None)] * n
            idx[i], idx[j] = bi, bj
            out = out + bra[bi, bj] * arr[tuple(idx)]
    rest = [l for l in labels if l not in (la, lb)]
    prob = float(np.sum(np.abs(out) ** 2))
    return prob, out.reshape(-1), rest


def random_secret_coeffs(seed):
    gen = np.random.default_rng(seed)
    v = gen.normal(size=4) + 1j * gen.normal(size=4)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng_factory():
    from qsts.bell import Rng

    return Rng
