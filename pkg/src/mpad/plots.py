"""Report figures rendered next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import DetCurve, VulnerabilityReport


def save_score_histograms(groups: dict[str, np.ndarray], path, xlabel: str = "score") -> None:
    """Overlaid per-class score histograms."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    lo = min(float(np.min(s)) for s in groups.values())
    hi = max(float(np.max(s)) for s in groups.values())
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    bins = np.linspace(lo, hi, 41)
    for name, scores in groups.items():
        ax.hist(scores, bins=bins, alpha=0.55, label=name, density=True)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("density")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_det_curve_plot(curve: DetCurve, path, eer: float | None = None) -> None:
    """APCER/BPCER trade-off on linear axes (no normal-deviate warping)."""
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    ax.plot(curve.apcers * 100.0, curve.bpcers * 100.0, drawstyle="steps-post", lw=1.5)
    if eer is not None:
        ax.plot([eer * 100.0], [eer * 100.0], "o", ms=6, label=f"D-EER = {eer * 100.0:.3f}%")
        ax.legend()
    ax.set_xlabel("APCER (%)")
    ax.set_ylabel("BPCER (%)")
    ax.set_xlim(0, 100)
    ax.set_ylim(0, 100)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_vulnerability_plot(report: VulnerabilityReport, path) -> None:
    """IAPMR and RIAPAR against the target FMR (log x-axis)."""
    fmrs = [row.target_fmr * 100.0 for row in report.rows]
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    ax.semilogx(fmrs, [row.iapmr * 100.0 for row in report.rows], "o-", label="IAPMR")
    ax.semilogx(fmrs, [row.riapar * 100.0 for row in report.rows], "s--", label="RIAPAR")
    ax.set_xlabel("FMR (%)")
    ax.set_ylabel("rate (%)")
    ax.legend()
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
