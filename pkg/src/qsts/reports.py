"""Report envelopes and JSON/CSV serialization.

Amplitudes are emitted as decimal strings with 17 significant digits so
payloads round-trip float64 values exactly. The timestamp lives only on the
envelope; payloads are fully deterministic for fixed inputs, which is what
makes repeated runs byte-comparable.
"""
from __future__ import annotations

import csv
import datetime
import io
import json
from typing import Any

from .protocols import CorrectionTable, ProtocolTranscript, TwoQubitSecret
from .reference import sign_str
from .states import DensityMatrix, PureState
from .verification import (
    ExpansionAudit,
    GoldenTablesReport,
    McSummary,
    ChiSquareResult,
    SecurityReport,
    VerificationSummary,
)

TOOL_NAME = "qsts"
TOOL_VERSION = "0.1.0"


def fmt_real(x: float) -> str:
    return format(float(x), ".17e")


def amp_obj(z: complex) -> dict[str, str]:
    return {"re": fmt_real(z.real), "im": fmt_real(z.imag)}


def parse_amp(obj: dict[str, str]) -> complex:
    return complex(float(obj["re"]), float(obj["im"]))


def pure_state_obj(state: PureState) -> dict[str, Any]:
    return {
        "labels": list(state.labels),
        "amplitudes": [amp_obj(z) for z in state.vector],
    }


def density_matrix_obj(rho: DensityMatrix) -> dict[str, Any]:
    return {
        "labels": list(rho.labels),
        "matrix": [[amp_obj(z) for z in row] for row in rho.matrix],
    }


def secret_obj(secret: TwoQubitSecret) -> dict[str, Any]:
    return {
        "alpha": amp_obj(secret.alpha),
        "beta": amp_obj(secret.beta),
        "gamma": amp_obj(secret.gamma),
        "delta": amp_obj(secret.delta),
    }


def transcript_payload(tr: ProtocolTranscript) -> dict[str, Any]:
    return {
        "kind": "transcript",
        "scheme": tr.config.scheme.value,
        "n_agents": tr.config.n_agents,
        "receiver": tr.config.receiver,
        "seed": tr.seed,
        "secret": secret_obj(tr.secret_spec),
        "records": [
            {
                "pair": list(r.pair),
                "outcome": r.outcome.value,
                "actor": r.actor,
                "draw_index": r.draw_index,
            }
            for r in tr.records
        ],
        "published": {
            "v_pivot": tr.published.v_pivot,
            "v_combined": tr.published.v_combined,
            "p_pivot": sign_str(tr.published.p_pivot),
            "p_combined": sign_str(tr.published.p_combined),
            "pivot": list(tr.published.pivot),
        },
        "corrections": [op.name for op in tr.corrections],
        "final_labels": list(tr.final_labels),
        "final_state": pure_state_obj(tr.final_state),
        "fidelity": tr.fidelity,
        "classical_bits_sent": dict(sorted(tr.classical_bits_sent.items())),
    }


def table_payload(table: CorrectionTable, check: dict | None = None) -> dict[str, Any]:
    pivot = table.pivot_name
    rows = []
    for rule in table.rows():
        rows.append(
            {
                "v_total": rule.key.v_total,
                f"v_{pivot}": rule.key.v_pivot,
                f"p_{pivot}": sign_str(rule.key.p_pivot),
                "p_total": sign_str(rule.key.p_total),
                "state_pattern": rule.pattern,
                "op_i": rule.ops[0].name,
                "op_j": rule.ops[1].name,
            }
        )
    return {
        "kind": "table",
        "scheme": table.config.scheme.value,
        "receiver": table.config.receiver,
        "n_agents": table.config.n_agents,
        "pivot": pivot,
        "rows": rows,
        "check": check,
    }


def golden_report_obj(report: GoldenTablesReport) -> dict[str, Any]:
    out = {}
    for t in report.tables():
        out[t.name] = {
            "rows_matching": t.rows_matching,
            "rows_total": len(t.rows),
            "mismatches": [
                {
                    "row": r.index,
                    "key": r.key,
                    "printed_ops": [op.name for op in r.printed_ops],
                    "derived_ops": [op.name for op in r.derived_ops],
                    "printed_pattern": r.printed_pattern,
                    "derived_pattern": r.derived_pattern,
                }
                for r in t.mismatches()
            ],
        }
    out["passed"] = report.passed
    return out


def audit_obj(audit: ExpansionAudit) -> dict[str, Any]:
    return {
        "branches_matching": audit.branches_matching,
        "branches_total": len(audit.branches),
        "discrepancies": list(audit.discrepancies),
        "reconstruction_error": audit.reconstruction_error,
        "branches": [
            {
                "group": b.group,
                "term": b.term,
                "printed_header": b.printed_header.value,
                "inferred_header": b.inferred_header.value if b.inferred_header else None,
                "b5": b.b5.value,
                "pattern": b.pattern,
                "as_printed": b.as_printed,
            }
            for b in audit.branches
        ],
        "passed": audit.passed,
    }


def mc_obj(s: McSummary) -> dict[str, Any]:
    return {
        "scheme": s.scheme.value,
        "receiver": s.receiver,
        "n_agents": s.n_agents,
        "trials": s.trials,
        "seed": s.seed,
        "min_fidelity": fmt_real(s.min_fidelity),
        "mean_fidelity": fmt_real(s.mean_fidelity),
        "histogram": s.histogram,
        "passed": s.passed,
    }


def chi_square_obj(c: ChiSquareResult) -> dict[str, Any]:
    return {
        "statistic": c.statistic,
        "dof": c.dof,
        "threshold": c.threshold,
        "quantile": c.quantile,
        "passed": c.passed,
    }


def security_payload(report: SecurityReport) -> dict[str, Any]:
    return {
        "kind": "security",
        "seed": report.seed,
        "rho_channel_qubit": density_matrix_obj(report.rho_channel_qubit),
        "rho_direct_qubit": density_matrix_obj(report.rho_direct_qubit),
        "max_deviation_from_mixed": report.max_deviation_from_mixed,
        "distinct_corrections_per_publication": report.distinct_corrections_per_publication,
        "guess_success_probability": report.guess_success_probability,
        "max_wrong_correction_fidelity": report.max_wrong_correction_fidelity,
        "passed": report.passed,
    }


def verification_payload(summary: VerificationSummary) -> dict[str, Any]:
    return {
        "kind": "verification",
        "trials": summary.trials,
        "seed": summary.seed,
        "monte_carlo": [mc_obj(s) for s in summary.monte_carlo],
        "golden_tables": golden_report_obj(summary.golden_tables),
        "expansion_audit": audit_obj(summary.expansion_audit),
        "security": security_payload(summary.security),
        "outcome_chi_square": chi_square_obj(summary.outcome_chi_square),
        "failures": list(summary.failures),
        "passed": summary.passed,
    }


def envelope(command: str, request: dict[str, Any], payload: dict[str, Any]) -> dict[str, Any]:
    return {
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "command": command,
        "request": request,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "payload": payload,
    }


def dump_json(obj: dict[str, Any]) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def payload_bytes(env: dict[str, Any]) -> bytes:
    """Canonical bytes of the payload alone; excludes the timestamp."""
    return json.dumps(env["payload"], indent=2, sort_keys=True).encode()


# ---------------------------------------------------------------------------
# CSV rendering
# ---------------------------------------------------------------------------

def _flatten(prefix: str, obj: Any, rows: list[tuple[str, str]]) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, "" if obj is None else str(obj)))


def dump_csv(payload: dict[str, Any]) -> str:
    """Delimited rendering of a payload.

    Tables come out with the documented column order; everything else is
    flattened to (field, value) rows.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if payload.get("kind") == "table" and payload.get("rows"):
        header = list(payload["rows"][0].keys())
        writer.writerow(header)
        for row in payload["rows"]:
            writer.writerow([row[h] for h in header])
        check = payload.get("check")
        if check:
            writer.writerow([])
            writer.writerow(["check.reference", check["reference"]])
            writer.writerow(["check.rows_matching", check["rows_matching"]])
            for mm in check["mismatches"]:
                writer.writerow(
                    [
                        "check.mismatch",
                        f"row {mm['row']}",
                        mm["key"],
                        "printed " + "x".join(mm["printed_ops"]),
                        "derived " + "x".join(mm["derived_ops"]),
                    ]
                )
    else:
        rows: list[tuple[str, str]] = []
        _flatten("", payload, rows)
        writer.writerow(["field", "value"])
        writer.writerows(rows)
    return buf.getvalue()
