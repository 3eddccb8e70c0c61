"""End-to-end execution of the two state-sharing schemes.

Four-pair scheme: the sender holds an arbitrary two-qubit secret on (a, b)
plus one half of four |psi-> pairs; two pairs carry the secret to the agents
and two build the agents' mutual channel. Circular scheme: the sender shares
one pair with the first agent and one with the receiver, and each agent
shares a pair with the next one around the ring.

All corrections are derived by brute force from the simulation itself, never
transcribed, so the derived tables double as an oracle for the reference
tables shipped under ``data/``.
"""
from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .bell import (
    BELL_ORDER,
    BellOutcome,
    PAULI_PAIRS,
    PauliOp,
    Rng,
    bell_measure,
    bell_project,
    epr_pair,
)
from .states import (
    LabelError,
    NORM_ATOL,
    PureState,
    StateError,
    reorder_labels,
    tensor_product,
)

log = logging.getLogger(__name__)

COEFF_LETTERS = ("a", "b", "g", "d")
BASIS_BITS = ("00", "01", "10", "11")

# A unique correction must beat this; anything lower for all 16 pairs means
# the simulator itself is broken.
CORRECTION_FIDELITY = 1.0 - 1e-9


class Scheme(enum.Enum):
    FOUR_EPR = "four-epr"
    CIRCULAR = "circular"

    def __str__(self) -> str:
        return self.value


class ConfigError(ValueError):
    """Raised for invalid scheme configurations."""


@dataclass(frozen=True)
class SchemeConfig:
    scheme: Scheme
    n_agents: int = 2
    receiver: str = "charlie"

    def __post_init__(self):
        if self.scheme is Scheme.FOUR_EPR:
            if self.n_agents != 2:
                raise ConfigError("the four-pair scheme has exactly two agents")
            if self.receiver not in ("bob", "charlie"):
                raise ConfigError(f"invalid receiver {self.receiver!r}")
        elif self.scheme is Scheme.CIRCULAR:
            if not 2 <= self.n_agents <= 10:
                raise ConfigError("circular scheme supports 2..10 agents")
            if self.receiver != "charlie":
                raise ConfigError("the circular scheme reconstructs at charlie")
        else:  # pragma: no cover - enum is closed
            raise ConfigError(f"unknown scheme {self.scheme}")


@dataclass(frozen=True)
class TwoQubitSecret:
    """The arbitrary two-qubit state alpha|00> + beta|01> + gamma|10> + delta|11>."""

    alpha: complex
    beta: complex
    gamma: complex
    delta: complex

    def __post_init__(self):
        v = np.array([self.alpha, self.beta, self.gamma, self.delta], dtype=complex)
        if not np.all(np.isfinite(v)):
            raise StateError("secret coefficients must be finite")
        if abs(np.linalg.norm(v) - 1.0) > NORM_ATOL:
            raise StateError(
                f"secret norm {np.linalg.norm(v):.12g} deviates from 1 beyond {NORM_ATOL}"
            )
        v.flags.writeable = False
        object.__setattr__(self, "_vector", v)

    @property
    def vector(self) -> np.ndarray:
        return self._vector

    def as_state(self, labels=("a", "b")) -> PureState:
        labels = tuple(str(l) for l in labels)
        if len(labels) != 2 or labels[0] == labels[1]:
            raise LabelError("secret state needs two distinct labels")
        return PureState._owned(labels, self._vector.reshape(2, 2))

    def is_generic(self) -> bool:
        """Pairwise distinct nonzero magnitudes: no accidental degeneracies."""
        mags = np.abs(self.vector)
        if np.any(mags < 1e-6):
            return False
        return bool(np.min(np.abs(np.subtract.outer(mags, mags))[~np.eye(4, dtype=bool)]) > 1e-6)

    @classmethod
    def from_vector(cls, v) -> "TwoQubitSecret":
        v = np.asarray(v, dtype=complex).reshape(4)
        return cls(*(complex(x) for x in v))

    @classmethod
    def from_reals(cls, vals: Sequence[float]) -> "TwoQubitSecret":
        vals = list(vals)
        if len(vals) != 8:
            raise StateError("expected 8 reals: re,im interleaved for alpha..delta")
        return cls.from_vector([complex(vals[2 * k], vals[2 * k + 1]) for k in range(4)])

    @classmethod
    def haar_random(cls, rng: Rng) -> "TwoQubitSecret":
        z = rng.normal(8).reshape(2, 4)
        v = z[0] + 1j * z[1]
        return cls.from_vector(v / np.linalg.norm(v))


def fiducial_secret() -> TwoQubitSecret:
    """Generic magnitudes and phases; breaks every accidental degeneracy."""
    v = np.array([1, 2, 3, 4], dtype=complex) * np.exp(
        1j * np.array([0.0, np.pi / 7, np.pi / 3, np.pi / 5])
    )
    return TwoQubitSecret.from_vector(v / np.linalg.norm(v))


@dataclass(frozen=True)
class MeasurementRecord:
    pair: tuple[str, str]
    outcome: BellOutcome
    actor: str
    draw_index: int | None


@dataclass(frozen=True)
class PublishedBits:
    """The sender's four classical bits.

    ``pivot`` names the measurement whose raw result is published alongside
    the combined values; it is (b, 5) whenever charlie reconstructs and
    (a, 3) when bob does, because the receiver's directly fed qubit must be
    correctable from the raw pivot outcome alone.
    """

    v_pivot: int
    v_combined: int
    p_pivot: int
    p_combined: int
    pivot: tuple[str, str]

    def bit_count(self) -> int:
        return 4


class CorrectionKey(NamedTuple):
    v_total: int
    v_pivot: int
    p_pivot: int
    p_total: int


@dataclass(frozen=True)
class CorrectionRule:
    key: CorrectionKey
    ops: tuple[PauliOp, PauliOp]
    pattern: str


@dataclass
class CorrectionTable:
    config: SchemeConfig
    pivot_name: str
    rules: dict[CorrectionKey, CorrectionRule]

    def rows(self) -> list[CorrectionRule]:
        return [self.rules[k] for k in sorted(self.rules)]

    def ops_by_key(self) -> dict[CorrectionKey, tuple[PauliOp, PauliOp]]:
        return {k: r.ops for k, r in self.rules.items()}


@dataclass(frozen=True)
class ProtocolTranscript:
    config: SchemeConfig
    secret_spec: TwoQubitSecret
    records: tuple[MeasurementRecord, ...]
    published: PublishedBits
    corrections: tuple[PauliOp, PauliOp]
    final_labels: tuple[str, str]
    final_state: PureState
    fidelity: float
    classical_bits_sent: dict[str, int]
    seed: int | None


# ---------------------------------------------------------------------------
# Register layout and measurement schedule
# ---------------------------------------------------------------------------

def register_labels(config: SchemeConfig) -> tuple[str, ...]:
    if config.scheme is Scheme.FOUR_EPR:
        return ("a", "b") + tuple(str(i) for i in range(1, 9))
    n = config.n_agents
    return ("a", "b") + tuple(str(i) for i in range(3, 2 * n + 5))


def ownership(config: SchemeConfig) -> dict[str, tuple[str, ...]]:
    """Who holds which photon after distribution."""
    if config.scheme is Scheme.FOUR_EPR:
        return {
            "alice": ("a", "b", "1", "3", "5", "7"),
            "bob": ("2", "4"),
            "charlie": ("6", "8"),
        }
    n = config.n_agents
    own: dict[str, tuple[str, ...]] = {"alice": ("a", "b", "3", "5")}
    for i in range(1, n):
        incoming = "4" if i == 1 else str(2 * i + 4)
        own[f"bob_{i}"] = (incoming, str(2 * i + 5))
    own["charlie"] = (str(2 * n + 4), "6")
    return own


@lru_cache(maxsize=None)
def measurement_schedule(config: SchemeConfig) -> tuple[tuple[str, tuple[str, str]], ...]:
    """Ordered (actor, pair) sequence. Alice's measurements commute pairwise."""
    if config.scheme is Scheme.FOUR_EPR:
        alice = (("alice", ("a", "3")), ("alice", ("b", "5")), ("alice", ("1", "7")))
        if config.receiver == "charlie":
            return alice + (("bob", ("2", "4")),)
        return alice + (("charlie", ("8", "6")),)
    sched = [("alice", ("a", "3")), ("alice", ("b", "5"))]
    own = ownership(config)
    for i in range(1, config.n_agents):
        sched.append((f"bob_{i}", own[f"bob_{i}"]))
    return tuple(sched)


def controllers(config: SchemeConfig) -> tuple[str, ...]:
    return tuple(actor for actor, _ in measurement_schedule(config) if actor != "alice")


def receiver_pair(config: SchemeConfig) -> tuple[str, str]:
    """Receiver's qubits, descendant of ``a`` first, of ``b`` second."""
    if config.scheme is Scheme.FOUR_EPR:
        return ("8", "6") if config.receiver == "charlie" else ("4", "2")
    return (str(2 * config.n_agents + 4), "6")


def pivot_pair(config: SchemeConfig) -> tuple[str, str]:
    if config.scheme is Scheme.FOUR_EPR and config.receiver == "bob":
        return ("a", "3")
    return ("b", "5")


def distributed_pairs(config: SchemeConfig) -> list[tuple[str, str]]:
    if config.scheme is Scheme.FOUR_EPR:
        return [("1", "2"), ("3", "4"), ("5", "6"), ("7", "8")]
    n = config.n_agents
    pairs = [("3", "4"), ("5", "6")]
    pairs += [(str(2 * i + 5), str(2 * i + 6)) for i in range(1, n - 1)]
    pairs.append((str(2 * n + 3), str(2 * n + 4)))
    return pairs


@lru_cache(maxsize=None)
def _epr_factors(config: SchemeConfig) -> tuple[PureState, ...]:
    # PureStates are immutable, so sharing one instance per pair is safe.
    return tuple(epr_pair(la, lb) for la, lb in distributed_pairs(config))


_CHAIN_CACHE: dict[tuple, PureState] = {}


def _pair_chain(config: SchemeConfig) -> PureState:
    """Tensor product of every distributed |psi-> pair, cached per layout."""
    cache_id = (config.scheme, config.n_agents)
    chain = _CHAIN_CACHE.get(cache_id)
    if chain is None:
        pairs = distributed_pairs(config)
        chain = epr_pair(*pairs[0])
        for la, lb in pairs[1:]:
            chain = tensor_product(chain, epr_pair(la, lb))
        _CHAIN_CACHE[cache_id] = chain
    return chain


def build_setup(secret: TwoQubitSecret, config: SchemeConfig) -> PureState:
    """Secret on (a, b) joined with every distributed |psi-> pair."""
    return tensor_product(secret.as_state(), _pair_chain(config))


class _FactorRegister:
    """The joint register kept as a product of independent factors.

    Bell measurements only ever touch two qubits, so merging just the
    factors a measurement involves (never more than four qubits here) gives
    bitwise the same outcome distribution and post states as carrying the
    full joint vector, at a cost independent of the agent count.
    """

    def __init__(self, factors: list[PureState]):
        self.factors = factors

    @classmethod
    def initial(cls, secret: TwoQubitSecret, config: SchemeConfig) -> "_FactorRegister":
        return cls([secret.as_state(), *_epr_factors(config)])

    def _merged(self, la: str, lb: str) -> PureState:
        hit, rest = [], []
        for f in self.factors:
            (hit if (la in f.labels or lb in f.labels) else rest).append(f)
        if not hit or (len(hit) == 1 and not {la, lb} <= set(hit[0].labels)):
            raise LabelError(f"pair ({la},{lb}) not present in the register")
        merged = hit[0]
        for f in hit[1:]:
            merged = tensor_product(merged, f)
        self.factors = rest
        return merged

    def project(self, la: str, lb: str, kind: BellOutcome) -> float:
        prob, post = bell_project(self._merged(la, lb), la, lb, kind)
        if post.n_qubits:
            self.factors.append(post)
        return prob

    def measure(self, la: str, lb: str, rng: Rng) -> tuple[BellOutcome, int]:
        kind, post, draw = bell_measure(self._merged(la, lb), la, lb, rng)
        if post.n_qubits:
            self.factors.append(post)
        return kind, draw

    def remaining(self, order: Sequence[str]) -> PureState:
        state = self.factors[0]
        for f in self.factors[1:]:
            state = tensor_product(state, f)
        return reorder_labels(state, order)


# ---------------------------------------------------------------------------
# Classical bookkeeping
# ---------------------------------------------------------------------------

def alice_publication(
    records: Sequence[MeasurementRecord], pivot: tuple[str, str] = ("b", "5")
) -> PublishedBits:
    alice = [r for r in records if r.actor == "alice"]
    if not alice:
        raise ValueError("no sender measurement records")
    pivot_rec = next((r for r in alice if r.pair == pivot), None)
    if pivot_rec is None:
        raise ValueError(f"pivot pair {pivot} missing from sender records")
    v_comb, p_comb = 0, 1
    for r in alice:
        v_comb ^= r.outcome.bit_value
        p_comb *= r.outcome.parity
    return PublishedBits(
        v_pivot=pivot_rec.outcome.bit_value,
        v_combined=v_comb,
        p_pivot=pivot_rec.outcome.parity,
        p_combined=p_comb,
        pivot=pivot,
    )


def key_from_published(
    published: PublishedBits, controller_records: Sequence[MeasurementRecord]
) -> CorrectionKey:
    """What the receiver computes from the announced classical bits alone."""
    v_total = published.v_combined
    p_total = published.p_combined
    for r in controller_records:
        v_total ^= r.outcome.bit_value
        p_total *= r.outcome.parity
    return CorrectionKey(v_total, published.v_pivot, published.p_pivot, p_total)


def key_from_outcomes(config: SchemeConfig, outcomes: Sequence[BellOutcome]) -> CorrectionKey:
    sched = measurement_schedule(config)
    if len(outcomes) != len(sched):
        raise ValueError(f"expected {len(sched)} outcomes, got {len(outcomes)}")
    piv = pivot_pair(config)
    v_total, p_total = 0, 1
    v_piv = p_piv = None
    for (actor, pair), k in zip(sched, outcomes):
        v_total ^= k.bit_value
        p_total *= k.parity
        if pair == piv:
            v_piv, p_piv = k.bit_value, k.parity
    return CorrectionKey(v_total, v_piv, p_piv, p_total)


# ---------------------------------------------------------------------------
# Forced-outcome branch extraction
# ---------------------------------------------------------------------------

def final_state_for_outcomes(
    secret: TwoQubitSecret, config: SchemeConfig, outcomes: Sequence[BellOutcome]
) -> PureState:
    """Receiver-pair state before correction for one forced branch."""
    sched = measurement_schedule(config)
    if len(outcomes) != len(sched):
        raise ValueError(f"expected {len(sched)} outcomes, got {len(outcomes)}")
    reg = _FactorRegister.initial(secret, config)
    for (_, (la, lb)), kind in zip(sched, outcomes):
        reg.project(la, lb, kind)
    return reg.remaining(receiver_pair(config))


# ---------------------------------------------------------------------------
# Correction search
# ---------------------------------------------------------------------------

_PAIR_MATRICES = np.stack([np.kron(pi.matrix, pj.matrix) for pi, pj in PAULI_PAIRS])


def find_correction(state: PureState, secret: TwoQubitSecret) -> tuple[PauliOp, PauliOp]:
    """The unique local pair turning ``state`` back into the secret.

    Raises if no pair reaches fidelity 1 (simulator bug) or several do
    (degenerate secret; retry with generic coefficients).
    """
    target = secret.vector
    candidates = _PAIR_MATRICES @ state.vector
    fids = np.abs(candidates @ target.conj()) ** 2
    hits = np.nonzero(fids >= CORRECTION_FIDELITY)[0]
    if len(hits) == 0:
        raise RuntimeError(
            f"no correction pair reconstructs the secret (best fidelity {fids.max():.6f})"
        )
    if len(hits) > 1:
        raise RuntimeError(
            "multiple correction pairs reach fidelity 1; "
            "the reference secret is degenerate, retry with generic coefficients"
        )
    return PAULI_PAIRS[int(hits[0])]


def extract_pattern(state: PureState, secret: TwoQubitSecret) -> str:
    """Classify a receiver state as a signed permutation of the secret.

    Returns strings like ``+a|00>+b|01>-g|10>-d|11>``, phase-normalized so
    the ``a`` coefficient carries ``+``. Requires a generic secret.
    """
    if not secret.is_generic():
        raise ValueError("pattern extraction needs a generic secret")
    c = secret.vector
    v = state.vector / np.linalg.norm(state.vector)
    perm = []
    taken = set()
    for k in range(4):
        diffs = np.abs(np.abs(v) - abs(c[k]))
        order = np.argsort(diffs)
        pos = next(int(p) for p in order if int(p) not in taken)
        if diffs[pos] > 1e-6:
            raise ValueError("state is not a signed permutation of the secret")
        taken.add(pos)
        perm.append(pos)
    phase = v[perm[0]] / c[0]
    signs = []
    for k in range(4):
        ratio = v[perm[k]] / (phase * c[k])
        if abs(ratio.imag) > 1e-6 or abs(abs(ratio.real) - 1.0) > 1e-6:
            raise ValueError("state is not a signed permutation of the secret")
        signs.append(1 if ratio.real > 0 else -1)
    return "".join(
        f"{'+' if s > 0 else '-'}{COEFF_LETTERS[k]}|{BASIS_BITS[p]}>"
        for k, (p, s) in enumerate(zip(perm, signs))
    )


def pattern_matrix(pattern: str) -> np.ndarray:
    """Signed permutation matrix mapping secret coefficients to the state."""
    mat = np.zeros((4, 4))
    if len(pattern) != 24:
        raise ValueError(f"malformed pattern {pattern!r}")
    for chunk in (pattern[i : i + 6] for i in range(0, 24, 6)):
        bits = chunk[3:5]
        if (
            chunk[0] not in "+-"
            or chunk[1] not in COEFF_LETTERS
            or chunk[2] != "|"
            or chunk[5] != ">"
            or bits not in BASIS_BITS
        ):
            raise ValueError(f"malformed pattern term {chunk!r}")
        sign = 1.0 if chunk[0] == "+" else -1.0
        mat[BASIS_BITS.index(bits), COEFF_LETTERS.index(chunk[1])] = sign
    if not np.allclose(np.abs(mat) @ np.ones(4), np.ones(4)):
        raise ValueError(f"pattern {pattern!r} is not a signed permutation")
    return mat


# ---------------------------------------------------------------------------
# Table derivation
# ---------------------------------------------------------------------------

def derive_correction_table(
    config: SchemeConfig, secret: TwoQubitSecret | None = None
) -> CorrectionTable:
    """Brute-force the full key -> (pattern, correction) table.

    Enumerates every outcome combination of the scheme's schedule on a
    generic secret, finds the unique correcting pair per branch, and checks
    that branches sharing a key agree on both pattern and correction.
    """
    secret = secret or fiducial_secret()
    if not secret.is_generic():
        raise ValueError("table derivation needs a generic secret")
    m = len(measurement_schedule(config))
    rules: dict[CorrectionKey, CorrectionRule] = {}
    for combo in itertools.product(BELL_ORDER, repeat=m):
        final = final_state_for_outcomes(secret, config, combo)
        ops = find_correction(final, secret)
        pattern = extract_pattern(final, secret)
        key = key_from_outcomes(config, combo)
        rule = CorrectionRule(key, ops, pattern)
        seen = rules.get(key)
        if seen is None:
            rules[key] = rule
        elif (seen.ops, seen.pattern) != (rule.ops, rule.pattern):
            raise RuntimeError(
                f"outcome combinations sharing key {key} demand different "
                f"corrections: {seen.ops} vs {rule.ops}"
            )
    if len(rules) != 16:
        raise RuntimeError(f"expected 16 keys, derived {len(rules)}")
    log.info("derived %s/%s table with %d keys", config.scheme, config.receiver, len(rules))
    return CorrectionTable(config, pivot_name="".join(pivot_pair(config)), rules=rules)


_CORRECTION_CACHE: dict[tuple, dict[CorrectionKey, tuple[PauliOp, PauliOp]]] = {}


def _outcome_with(v: int, p: int) -> BellOutcome:
    return BellOutcome.from_bits(v, p)


def _representative_outcomes(config: SchemeConfig, key: CorrectionKey) -> list[BellOutcome]:
    """One outcome combination realizing ``key``.

    Every non-pivot slot except one solver slot is pinned to |psi->; the
    solver absorbs whatever bit value and parity the totals still need.
    Valid because the correction depends on outcomes only through the key,
    which the exhaustive derivation cross-checks.
    """
    sched = measurement_schedule(config)
    piv = pivot_pair(config)
    pairs = [pair for _, pair in sched]
    pivot_idx = pairs.index(piv)
    solver_idx = 1 if pivot_idx == 0 else 0
    outcomes: list[BellOutcome | None] = [None] * len(sched)
    outcomes[pivot_idx] = _outcome_with(key.v_pivot, key.p_pivot)
    v_rest, p_rest = 0, 1
    for i in range(len(sched)):
        if i not in (pivot_idx, solver_idx):
            outcomes[i] = BellOutcome.PSI_MINUS
            v_rest ^= 1
            p_rest *= -1
    outcomes[solver_idx] = _outcome_with(
        key.v_total ^ key.v_pivot ^ v_rest, key.p_total * key.p_pivot * p_rest
    )
    return outcomes


def correction_for(key: CorrectionKey, config: SchemeConfig) -> tuple[PauliOp, PauliOp]:
    """Table lookup; derives and caches the entry on first use."""
    cache_id = (config.scheme, config.receiver, config.n_agents)
    table = _CORRECTION_CACHE.setdefault(cache_id, {})
    if key not in table:
        secret = fiducial_secret()
        final = final_state_for_outcomes(secret, config, _representative_outcomes(config, key))
        table[key] = find_correction(final, secret)
    return table[key]


# ---------------------------------------------------------------------------
# Full protocol run
# ---------------------------------------------------------------------------

def run_protocol(
    secret: TwoQubitSecret,
    config: SchemeConfig,
    rng: Rng | None = None,
    forced_outcomes: Sequence[BellOutcome] | None = None,
) -> ProtocolTranscript:
    """Execute one complete run and return its transcript.

    Outcomes are sampled from the Born rule via ``rng`` unless
    ``forced_outcomes`` selects a deterministic branch.
    """
    if rng is None and forced_outcomes is None:
        raise ValueError("need an rng or forced outcomes")
    sched = measurement_schedule(config)
    if forced_outcomes is not None and len(forced_outcomes) != len(sched):
        raise ValueError(f"expected {len(sched)} forced outcomes")
    reg = _FactorRegister.initial(secret, config)
    records: list[MeasurementRecord] = []
    for step, (actor, (la, lb)) in enumerate(sched):
        if forced_outcomes is not None:
            kind = forced_outcomes[step]
            reg.project(la, lb, kind)
            draw = None
        else:
            kind, draw = reg.measure(la, lb, rng)
        records.append(MeasurementRecord((la, lb), kind, actor, draw))
        log.debug("%s measured (%s,%s): %s", actor, la, lb, kind)
    published = alice_publication(records, pivot_pair(config))
    ctrl_records = [r for r in records if r.actor != "alice"]
    key = key_from_published(published, ctrl_records)
    ops = correction_for(key, config)
    pair = receiver_pair(config)
    pre = reg.remaining(pair)
    # Two-qubit register: one precomputed 4x4 product beats two axis ops.
    corrected = _PAIR_MATRICES[ops[0].value * 4 + ops[1].value] @ pre.vector
    final = PureState._owned(pair, corrected.reshape(2, 2))
    fid = float(min(abs(np.vdot(corrected, secret.vector)) ** 2, 1.0))
    bits = {"alice": published.bit_count()}
    for c in controllers(config):
        bits[c] = 2
    return ProtocolTranscript(
        config=config,
        secret_spec=secret,
        records=tuple(records),
        published=published,
        corrections=ops,
        final_labels=pair,
        final_state=final,
        fidelity=fid,
        classical_bits_sent=bits,
        seed=rng.seed if rng is not None else None,
    )
