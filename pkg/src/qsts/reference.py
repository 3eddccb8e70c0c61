"""Loaders for the reference tables and branch expansion shipped in data/.

These files transcribe the protocol's documented correction tables verbatim,
in the documented row order. They are comparison targets only; nothing in
the simulator consumes them as a source of corrections.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .bell import BellOutcome, PauliOp
from .protocols import CorrectionKey, pattern_matrix

_SIGN = {"+": 1, "-": -1}


def _sign(s: str) -> int:
    try:
        return _SIGN[s]
    except KeyError:
        raise ValueError(f"bad sign {s!r}") from None


def sign_str(p: int) -> str:
    return "+" if p > 0 else "-"


def _read_data(name: str) -> str:
    return resources.files("qsts.data").joinpath(name).read_text(encoding="utf-8")


@dataclass(frozen=True)
class GoldenKeyedRow:
    index: int
    key: CorrectionKey
    pattern: str
    ops: tuple[PauliOp, PauliOp]


@dataclass(frozen=True)
class GoldenFixedPivotRow:
    index: int
    v_alice: int
    v_b5: int
    p_b5: int
    p_alice: int
    r_bob: BellOutcome
    pattern: str
    ops: tuple[PauliOp, PauliOp]


@lru_cache(maxsize=None)
def golden_keyed_table(name: str) -> tuple[GoldenKeyedRow, ...]:
    """Reference table for one scheme: 'four_epr' or 'circular'."""
    text = _read_data(f"golden_table_{name}.csv")
    rows = []
    for i, rec in enumerate(csv.DictReader(text.splitlines()), start=1):
        rows.append(
            GoldenKeyedRow(
                index=i,
                key=CorrectionKey(
                    int(rec["v_total"]),
                    int(rec["v_b5"]),
                    _sign(rec["p_b5"]),
                    _sign(rec["p_total"]),
                ),
                pattern=rec["state_pattern"],
                ops=(PauliOp[rec["op_i"]], PauliOp[rec["op_j"]]),
            )
        )
    if len(rows) != 16 or len({r.key for r in rows}) != 16:
        raise ValueError(f"reference table {name} must have 16 distinct keys")
    return tuple(rows)


@lru_cache(maxsize=None)
def golden_fixed_pivot_table() -> tuple[GoldenFixedPivotRow, ...]:
    """Reference table for the fixed-pivot view (pivot result held at phi+)."""
    text = _read_data("golden_table_fixed_b5.csv")
    rows = []
    for i, rec in enumerate(csv.DictReader(text.splitlines()), start=1):
        rows.append(
            GoldenFixedPivotRow(
                index=i,
                v_alice=int(rec["v_alice"]),
                v_b5=int(rec["v_b5"]),
                p_b5=_sign(rec["p_b5"]),
                p_alice=_sign(rec["p_alice"]),
                r_bob=BellOutcome(rec["r_bob"]),
                pattern=rec["state_pattern"],
                ops=(PauliOp[rec["op_i"]], PauliOp[rec["op_j"]]),
            )
        )
    if len(rows) != 16:
        raise ValueError("fixed-pivot reference table must have 16 rows")
    return tuple(rows)


@dataclass(frozen=True)
class GoldenBranch:
    group: int
    term: int
    printed_header: BellOutcome
    b5: BellOutcome
    content: np.ndarray
    pattern: str
    is_header_carrier: bool


@lru_cache(maxsize=None)
def golden_expansion() -> tuple[GoldenBranch, ...]:
    """The documented 16-branch double Bell-basis expansion.

    Each branch's ``content`` is the full signed-permutation matrix mapping
    secret coefficients to the (4,6) component, prefactor included.
    """
    data = json.loads(_read_data("golden_expansion.json"))
    pref = float(data["prefactor"])
    branches = []
    for g, group in enumerate(data["groups"], start=1):
        header = BellOutcome(group["header"])
        gsign = int(group["sign"])
        for t, term in enumerate(group["terms"], start=1):
            content = pref * gsign * int(term["sign"]) * pattern_matrix(term["pattern"])
            content.flags.writeable = False
            branches.append(
                GoldenBranch(
                    group=g,
                    term=t,
                    printed_header=header,
                    b5=BellOutcome(term["b5"]),
                    content=content,
                    pattern=term["pattern"],
                    is_header_carrier=(t == 1),
                )
            )
    if len(branches) != 16:
        raise ValueError("reference expansion must have 16 branches")
    return tuple(branches)


@lru_cache(maxsize=None)
def report_schema() -> dict:
    return json.loads(_read_data("report_schema.json"))
