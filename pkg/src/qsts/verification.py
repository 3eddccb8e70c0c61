"""Verification campaigns: reference-table checks, branch-expansion audit,
Monte Carlo fidelity runs, outcome statistics, and the security properties.

Check failures are results, not exceptions: every function returns a report
object stating what matched and what did not.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .bell import (
    BELL_ORDER,
    BellOutcome,
    PAULI_PAIRS,
    PauliOp,
    Rng,
    bell_project,
    bell_state,
    epr_pair,
)
from .protocols import (
    CorrectionKey,
    Scheme,
    SchemeConfig,
    TwoQubitSecret,
    build_setup,
    correction_for,
    derive_correction_table,
    extract_pattern,
    fiducial_secret,
    find_correction,
    final_state_for_outcomes,
    measurement_schedule,
    run_protocol,
)
from .states import DensityMatrix, PureState, fidelity_pure, partial_trace, reorder_labels, tensor_product
from . import reference

log = logging.getLogger(__name__)

MC_FIDELITY_FLOOR = 1.0 - 1e-10
CHI2_QUANTILE = 0.999
WRONG_CORRECTION_CEILING = 1.0 - 1e-3


# ---------------------------------------------------------------------------
# Reference-table comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RowCheck:
    table: str
    index: int
    key: str
    printed_ops: tuple[PauliOp, PauliOp]
    derived_ops: tuple[PauliOp, PauliOp]
    printed_pattern: str
    derived_pattern: str
    match: bool


@dataclass
class TableCheck:
    name: str
    rows: list[RowCheck]

    @property
    def rows_matching(self) -> int:
        return sum(r.match for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.rows_matching == len(self.rows)

    def mismatches(self) -> list[RowCheck]:
        return [r for r in self.rows if not r.match]


@dataclass
class GoldenTablesReport:
    four_epr: TableCheck
    fixed_b5: TableCheck
    circular: TableCheck

    @property
    def passed(self) -> bool:
        return self.four_epr.passed and self.fixed_b5.passed and self.circular.passed

    def tables(self) -> list[TableCheck]:
        return [self.four_epr, self.fixed_b5, self.circular]


def _key_str(key: CorrectionKey) -> str:
    return (
        f"v_total={key.v_total} v_pivot={key.v_pivot} "
        f"p_pivot={reference.sign_str(key.p_pivot)} p_total={reference.sign_str(key.p_total)}"
    )


def check_keyed_table(name: str, config: SchemeConfig) -> TableCheck:
    derived = derive_correction_table(config)
    rows = []
    for g in reference.golden_keyed_table(name):
        rule = derived.rules[g.key]
        rows.append(
            RowCheck(
                table=name,
                index=g.index,
                key=_key_str(g.key),
                printed_ops=g.ops,
                derived_ops=rule.ops,
                printed_pattern=g.pattern,
                derived_pattern=rule.pattern,
                match=(g.ops == rule.ops and g.pattern == rule.pattern),
            )
        )
    return TableCheck(name, rows)


def _derive_fixed_pivot_relation() -> dict[tuple[int, int, BellOutcome], tuple]:
    """Four-pair relation restricted to the pivot result phi+, re-keyed by
    (sender combined bit value, sender combined parity, controller result)."""
    secret = fiducial_secret()
    config = SchemeConfig(Scheme.FOUR_EPR)
    setup = build_setup(secret, config)
    out: dict[tuple[int, int, BellOutcome], tuple] = {}
    for combo in itertools.product(BELL_ORDER, repeat=4):
        if combo[1] is not BellOutcome.PHI_PLUS:
            continue
        state = setup
        for (_, (la, lb)), kind in zip(measurement_schedule(config), combo):
            _, state = bell_project(state, la, lb, kind)
        state = reorder_labels(state, ("8", "6"))
        ops = find_correction(state, secret)
        pattern = extract_pattern(state, secret)
        v_alice = combo[0].bit_value ^ combo[1].bit_value ^ combo[2].bit_value
        p_alice = combo[0].parity * combo[1].parity * combo[2].parity
        key = (v_alice, p_alice, combo[3])
        entry = (ops, pattern)
        if out.setdefault(key, entry) != entry:
            raise RuntimeError(f"fixed-pivot relation inconsistent at {key}")
    return out


def _check_fixed_pivot_table() -> TableCheck:
    derived = _derive_fixed_pivot_relation()
    rows = []
    for g in reference.golden_fixed_pivot_table():
        ops, pattern = derived[(g.v_alice, g.p_alice, g.r_bob)]
        rows.append(
            RowCheck(
                table="fixed_b5",
                index=g.index,
                key=(
                    f"v_alice={g.v_alice} p_alice={reference.sign_str(g.p_alice)} "
                    f"r_bob={g.r_bob}"
                ),
                printed_ops=g.ops,
                derived_ops=ops,
                printed_pattern=g.pattern,
                derived_pattern=pattern,
                match=(g.ops == ops and g.pattern == pattern),
            )
        )
    return TableCheck("fixed_b5", rows)


def check_golden_tables() -> GoldenTablesReport:
    """Row-by-row comparison of brute-forced tables against the references."""
    report = GoldenTablesReport(
        four_epr=check_keyed_table("four_epr", SchemeConfig(Scheme.FOUR_EPR)),
        fixed_b5=_check_fixed_pivot_table(),
        circular=check_keyed_table("circular", SchemeConfig(Scheme.CIRCULAR, n_agents=2)),
    )
    for t in report.tables():
        log.info("reference table %s: %d/%d rows match", t.name, t.rows_matching, len(t.rows))
    return report


# ---------------------------------------------------------------------------
# Branch-expansion audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchCheck:
    group: int
    term: int
    printed_header: BellOutcome
    inferred_header: BellOutcome | None
    b5: BellOutcome
    pattern: str
    content_found: bool
    header_ok: bool
    as_printed: bool


@dataclass
class ExpansionAudit:
    branches: list[BranchCheck]
    discrepancies: list[str]
    reconstruction_error: float

    @property
    def branches_matching(self) -> int:
        return sum(b.as_printed for b in self.branches)

    @property
    def passed(self) -> bool:
        # The audit is expected to find exactly one defect: a group header
        # that contradicts its own branch contents.
        return (
            self.branches_matching == 15
            and len(self.discrepancies) == 1
            and self.reconstruction_error < 1e-12
        )


def derive_branch_transfers() -> dict[tuple[BellOutcome, BellOutcome], np.ndarray]:
    """Transfer matrix of every (a,3)x(b,5) branch of the setup state.

    ``T[(k1, k2)]`` maps secret coefficients to the unnormalized (4,6)
    component, so summing |k1>|k2> (x) T|secret> over all branches rebuilds
    the setup state exactly.
    """
    transfers = {
        pair: np.zeros((4, 4), dtype=complex)
        for pair in itertools.product(BELL_ORDER, repeat=2)
    }
    for c in range(4):
        amps = np.zeros(4, dtype=complex)
        amps[c] = 1.0
        setup = PureState(("a", "b"), amps)
        setup = tensor_product(setup, epr_pair("3", "4"))
        setup = tensor_product(setup, epr_pair("5", "6"))
        for k1 in BELL_ORDER:
            _, s1 = bell_project(setup, "a", "3", k1, normalize=False)
            for k2 in BELL_ORDER:
                _, s2 = bell_project(s1, "b", "5", k2, normalize=False)
                transfers[(k1, k2)][:, c] = s2.vector
    return transfers


def audit_expansion() -> ExpansionAudit:
    """Re-derive the 16-branch expansion and diff it against the reference.

    Each reference branch is located in the derived expansion by its full
    content (pattern, signs, prefactor); a group's printed header is checked
    against the content-matched sector and attributed to the group's first
    branch, which is where the header is physically printed.
    """
    transfers = derive_branch_transfers()
    checks: list[BranchCheck] = []
    discrepancies: list[str] = []
    flagged_groups: set[int] = set()
    for g in reference.golden_expansion():
        inferred = None
        for k1 in BELL_ORDER:
            if np.allclose(transfers[(k1, g.b5)], g.content, atol=1e-12):
                inferred = k1
                break
        content_found = inferred is not None
        header_ok = content_found and inferred == g.printed_header
        as_printed = content_found and (header_ok or not g.is_header_carrier)
        checks.append(
            BranchCheck(
                group=g.group,
                term=g.term,
                printed_header=g.printed_header,
                inferred_header=inferred,
                b5=g.b5,
                pattern=g.pattern,
                content_found=content_found,
                header_ok=header_ok,
                as_printed=as_printed,
            )
        )
        if not content_found:
            discrepancies.append(
                f"group {g.group} term {g.term}: printed content matches no derived branch"
            )
        elif not header_ok and g.group not in flagged_groups:
            flagged_groups.add(g.group)
            discrepancies.append(
                f"group {g.group} header: printed {g.printed_header}, "
                f"content matches {inferred}"
            )

    # Completeness: the derived branches must reassemble the setup state.
    secret = fiducial_secret()
    sec = secret.vector
    amps = np.zeros((2,) * 6, dtype=complex)
    for (k1, k2), t_mat in transfers.items():
        part = tensor_product(
            tensor_product(bell_state(k1, "a", "3"), bell_state(k2, "b", "5")),
            PureState(("4", "6"), t_mat @ sec),
        )
        amps = amps + part.amps
    rebuilt = reorder_labels(
        PureState(("a", "3", "b", "5", "4", "6"), amps), ("a", "b", "3", "4", "5", "6")
    )
    err = 1.0 - fidelity_pure(rebuilt, _six_qubit_setup(secret))
    audit = ExpansionAudit(checks, discrepancies, float(max(err, 0.0)))
    log.info(
        "expansion audit: %d/16 branches as printed, %d discrepancies, recon err %.2e",
        audit.branches_matching,
        len(discrepancies),
        audit.reconstruction_error,
    )
    return audit


def _six_qubit_setup(secret: TwoQubitSecret) -> PureState:
    s = tensor_product(secret.as_state(), epr_pair("3", "4"))
    return tensor_product(s, epr_pair("5", "6"))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass
class McSummary:
    scheme: Scheme
    receiver: str
    n_agents: int
    trials: int
    seed: int
    min_fidelity: float
    mean_fidelity: float
    histogram: dict[str, int]

    @property
    def passed(self) -> bool:
        return self.min_fidelity >= MC_FIDELITY_FLOOR


def _hist_bins() -> dict[str, int]:
    return {f"{k1},{k2}": 0 for k1 in BELL_ORDER for k2 in BELL_ORDER}


def monte_carlo_fidelity(config: SchemeConfig, trials: int, seed: int) -> McSummary:
    """Haar-random secrets through full sampled runs.

    The histogram bins the sender's first two results (the pairs (a,3) and
    (b,5)), whose joint law is uniform over the 16 combinations.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    hist = _hist_bins()
    fid_min, fid_sum = 1.0, 0.0
    for t in range(trials):
        rng = Rng.for_trial(seed, t)
        secret = TwoQubitSecret.haar_random(rng)
        tr = run_protocol(secret, config, rng)
        fid_min = min(fid_min, tr.fidelity)
        fid_sum += tr.fidelity
        hist[f"{tr.records[0].outcome},{tr.records[1].outcome}"] += 1
    summary = McSummary(
        scheme=config.scheme,
        receiver=config.receiver,
        n_agents=config.n_agents,
        trials=trials,
        seed=seed,
        min_fidelity=fid_min,
        mean_fidelity=fid_sum / trials,
        histogram=hist,
    )
    log.info(
        "monte carlo %s/%s N=%d: %d trials, min fidelity %.3e from 1",
        config.scheme,
        config.receiver,
        config.n_agents,
        trials,
        1.0 - fid_min,
    )
    return summary


@dataclass
class ChiSquareResult:
    statistic: float
    dof: int
    threshold: float
    quantile: float
    passed: bool


def outcome_chi_square(histogram: dict[str, int]) -> ChiSquareResult:
    """Chi-square test of the 16-bin histogram against the uniform law."""
    counts = np.array(list(histogram.values()), dtype=float)
    total = counts.sum()
    expected = total / len(counts)
    statistic = float(np.sum((counts - expected) ** 2 / expected))
    dof = len(counts) - 1
    threshold = float(stats.chi2.ppf(CHI2_QUANTILE, dof))
    return ChiSquareResult(statistic, dof, threshold, CHI2_QUANTILE, statistic < threshold)


# ---------------------------------------------------------------------------
# Security properties
# ---------------------------------------------------------------------------

@dataclass
class SecurityReport:
    rho_channel_qubit: DensityMatrix
    rho_direct_qubit: DensityMatrix
    max_deviation_from_mixed: float
    distinct_corrections_per_publication: int
    guess_success_probability: float
    max_wrong_correction_fidelity: float
    seed: int

    @property
    def passed(self) -> bool:
        return (
            self.max_deviation_from_mixed < 1e-10
            and self.distinct_corrections_per_publication == 4
            and abs(self.guess_success_probability - 0.25) < 1e-12
            and self.max_wrong_correction_fidelity < WRONG_CORRECTION_CEILING
        )


def security_check(seed: int) -> SecurityReport:
    """The three checks behind the scheme's secrecy argument.

    (i) After the sender's three measurements the receiver's channel qubit 8
    is maximally mixed for every outcome triple. (ii) For every publication,
    the four possible controller results demand four pairwise distinct
    corrections, so guessing succeeds with probability exactly 1/4.
    (iii) A wrong correction pair leaves a generic secret measurably off.
    """
    config = SchemeConfig(Scheme.FOUR_EPR)
    rng = Rng(seed)
    secret = TwoQubitSecret.haar_random(rng)
    setup = build_setup(secret, config)
    alice_steps = measurement_schedule(config)[:3]

    max_dev = 0.0
    rho_sample: DensityMatrix | None = None
    rho_direct_sample: DensityMatrix | None = None
    distinct_min = 4
    inv_candidates = 0.0
    for triple in itertools.product(BELL_ORDER, repeat=3):
        state = setup
        for (_, (la, lb)), kind in zip(alice_steps, triple):
            _, state = bell_project(state, la, lb, kind)
        rho8 = partial_trace(state, ("8",))
        max_dev = max(max_dev, rho8.max_deviation_from_mixed())
        if rho_sample is None:
            rho_sample = rho8
            rho_direct_sample = partial_trace(state, ("6",))
        v_alice = 0
        p_alice = 1
        for kind in triple:
            v_alice ^= kind.bit_value
            p_alice *= kind.parity
        corrections = set()
        for k4 in BELL_ORDER:
            key = CorrectionKey(
                v_alice ^ k4.bit_value,
                triple[1].bit_value,
                triple[1].parity,
                p_alice * k4.parity,
            )
            corrections.add(correction_for(key, config))
        distinct_min = min(distinct_min, len(corrections))
        # Uniform guess over the candidate pairs this publication allows.
        inv_candidates += 1.0 / len(corrections)

    guess_probability = inv_candidates / 64.0

    fid_secret = fiducial_secret()
    branch = final_state_for_outcomes(fid_secret, config, [BellOutcome.PSI_MINUS] * 4)
    right = find_correction(branch, fid_secret)
    target = fid_secret.vector
    max_wrong = 0.0
    for (pi, pj), mat in zip(PAULI_PAIRS, _pair_matrices()):
        if (pi, pj) == right:
            continue
        fid = abs(np.vdot(target, mat @ branch.vector)) ** 2
        max_wrong = max(max_wrong, float(fid))

    report = SecurityReport(
        rho_channel_qubit=rho_sample,
        rho_direct_qubit=rho_direct_sample,
        max_deviation_from_mixed=float(max_dev),
        distinct_corrections_per_publication=distinct_min,
        guess_success_probability=float(guess_probability),
        max_wrong_correction_fidelity=max_wrong,
        seed=seed,
    )
    log.info(
        "security: rho_8 deviation %.2e, %d distinct corrections, guess %.4f, wrong-corr fid %.4f",
        report.max_deviation_from_mixed,
        report.distinct_corrections_per_publication,
        report.guess_success_probability,
        report.max_wrong_correction_fidelity,
    )
    return report


def _pair_matrices() -> np.ndarray:
    from .protocols import _PAIR_MATRICES

    return _PAIR_MATRICES


# ---------------------------------------------------------------------------
# Full verification campaign
# ---------------------------------------------------------------------------

@dataclass
class VerificationSummary:
    trials: int
    seed: int
    monte_carlo: list[McSummary]
    golden_tables: GoldenTablesReport
    expansion_audit: ExpansionAudit
    security: SecurityReport
    outcome_chi_square: ChiSquareResult
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


VERIFY_CONFIGS = (
    SchemeConfig(Scheme.FOUR_EPR, receiver="charlie"),
    SchemeConfig(Scheme.FOUR_EPR, receiver="bob"),
    SchemeConfig(Scheme.CIRCULAR, n_agents=2),
    SchemeConfig(Scheme.CIRCULAR, n_agents=3),
    SchemeConfig(Scheme.CIRCULAR, n_agents=5),
)


def verify_all(trials: int, seed: int) -> VerificationSummary:
    """Run the whole campaign and collect failures as strings."""
    mc = [monte_carlo_fidelity(cfg, trials, seed) for cfg in VERIFY_CONFIGS]
    golden = check_golden_tables()
    audit = audit_expansion()
    security = security_check(seed)
    chi = outcome_chi_square(mc[0].histogram)

    failures = []
    for s in mc:
        if not s.passed:
            failures.append(
                f"monte carlo {s.scheme}/{s.receiver} N={s.n_agents}: "
                f"min fidelity {s.min_fidelity!r} below {MC_FIDELITY_FLOOR!r}"
            )
    for t in golden.tables():
        if not t.passed:
            failures.append(
                f"reference table {t.name}: {len(t.mismatches())} of {len(t.rows)} rows "
                "disagree with the brute-force derivation"
            )
    if not audit.passed:
        failures.append(
            f"expansion audit: {audit.branches_matching}/16 branches as printed, "
            f"{len(audit.discrepancies)} discrepancies, "
            f"reconstruction error {audit.reconstruction_error:.2e}"
        )
    if not security.passed:
        failures.append("security properties violated")
    if not chi.passed:
        failures.append(
            f"outcome histogram chi-square {chi.statistic:.2f} exceeds "
            f"{chi.threshold:.2f} at the {chi.quantile:.1%} level"
        )
    return VerificationSummary(
        trials=trials,
        seed=seed,
        monte_carlo=mc,
        golden_tables=golden,
        expansion_audit=audit,
        security=security,
        outcome_chi_square=chi,
        failures=failures,
    )
