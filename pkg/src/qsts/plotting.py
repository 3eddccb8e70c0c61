"""Figure rendering for the report path.

Every report written to disk can carry companion PNGs next to the delimited
output. Rendering is headless (Agg) and each helper returns the saved path.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .protocols import CorrectionTable, ProtocolTranscript
from .reference import sign_str
from .states import DensityMatrix
from .verification import McSummary

_BASIS = ("00", "01", "10", "11")


def _save(fig, path: Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def state_comparison_figure(transcript: ProtocolTranscript, path: Path) -> Path:
    """Secret vs reconstructed basis populations, fidelity in the title."""
    secret_p = np.abs(transcript.secret_spec.vector) ** 2
    final_p = transcript.final_state.probabilities()
    x = np.arange(4)
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.38
    ax.bar(x - width / 2, secret_p, width, label="secret")
    ax.bar(x + width / 2, final_p, width, label="reconstructed")
    ax.set_xticks(x, [f"|{b}>" for b in _BASIS])
    ax.set_ylabel("population")
    ax.set_title(
        f"{transcript.config.scheme} -> {transcript.config.receiver}, "
        f"fidelity deficit {1 - transcript.fidelity:.1e}"
    )
    ax.legend(frameon=False)
    ax.grid(True, axis="y", alpha=0.3)
    return _save(fig, path)


def table_figure(table: CorrectionTable, path: Path) -> Path:
    """The 16 correction pairs on a (bit values) x (parities) grid."""
    v_axis = [(0, 0), (0, 1), (1, 0), (1, 1)]
    p_axis = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    fig, ax = plt.subplots(figsize=(6.5, 5))
    ax.imshow(np.zeros((4, 4)), cmap="Greys", vmin=0, vmax=1)
    for r, (vt, vp) in enumerate(v_axis):
        for c, (pp, pt) in enumerate(p_axis):
            rule = table.rules.get((vt, vp, pp, pt))
            text = f"{rule.ops[0].name} x {rule.ops[1].name}" if rule else "?"
            ax.text(c, r, text, ha="center", va="center", fontsize=11)
    piv = table.pivot_name
    ax.set_yticks(range(4), [f"v_total={vt}, v_{piv}={vp}" for vt, vp in v_axis])
    ax.set_xticks(
        range(4),
        [f"p_{piv}={sign_str(pp)}, p_total={sign_str(pt)}" for pp, pt in p_axis],
    )
    ax.set_xticks(np.arange(-0.5, 4), minor=True)
    ax.set_yticks(np.arange(-0.5, 4), minor=True)
    ax.grid(which="minor", color="0.8")
    ax.tick_params(which="both", length=0)
    plt.setp(ax.get_xticklabels(), rotation=20, ha="right")
    ax.set_title(f"derived corrections: {table.config.scheme} -> {table.config.receiver}")
    return _save(fig, path)


def outcome_histogram_figure(summary: McSummary, path: Path) -> Path:
    """Sampled 16-bin (a,3)x(b,5) histogram against the uniform law."""
    labels = list(summary.histogram.keys())
    counts = np.array(list(summary.histogram.values()))
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.bar(range(16), counts, color="steelblue")
    ax.axhline(summary.trials / 16, color="crimson", ls="--", label="uniform 1/16")
    ax.set_xticks(range(16), labels, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel("count")
    ax.set_title(
        f"{summary.scheme} outcome histogram, {summary.trials} trials, seed {summary.seed}"
    )
    ax.legend(frameon=False)
    return _save(fig, path)


def fidelity_summary_figure(summaries: list[McSummary], path: Path) -> Path:
    """Worst-case fidelity deficit per campaign, log scale."""
    names = [f"{s.scheme}/{s.receiver}\nN={s.n_agents}" for s in summaries]
    deficits = [max(1.0 - s.min_fidelity, 1e-18) for s in summaries]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(names, deficits, color="seagreen")
    ax.axhline(1e-10, color="crimson", ls="--", label="acceptance floor")
    ax.set_yscale("log")
    ax.set_ylabel("1 - min fidelity")
    ax.set_title("Monte Carlo reconstruction exactness")
    ax.legend(frameon=False)
    ax.grid(True, axis="y", alpha=0.3)
    return _save(fig, path)


def density_matrix_figure(rho: DensityMatrix, path: Path, title: str = "") -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(7, 3.2))
    for ax, part, name in ((axes[0], rho.matrix.real, "Re"), (axes[1], rho.matrix.imag, "Im")):
        im = ax.imshow(part, cmap="RdBu_r", vmin=-1, vmax=1)
        ax.set_title(f"{name}(rho_{','.join(rho.labels)})")
        dim = part.shape[0]
        n = int(np.log2(dim))
        ticks = [format(i, f"0{n}b") for i in range(dim)]
        ax.set_xticks(range(dim), ticks)
        ax.set_yticks(range(dim), ticks)
        fig.colorbar(im, ax=ax, fraction=0.046)
    if title:
        fig.suptitle(title)
    return _save(fig, path)
