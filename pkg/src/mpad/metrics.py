"""Biometric performance and attack-detection metrics (ISO/IEC 30107-3 style).

Conventions
-----------
Comparison scores: higher means a better match; labeled genuine / impostor /
attack. Detection scores: higher means more attack-like.

Boundary handling is fixed as score >= threshold => "match" for comparison
scores and score >= threshold => "attack" for detection scores.

Every rate is an exact count divided by a class size, and candidate
thresholds are the midpoints of adjacent distinct scores plus one
sentinel below the minimum and one above the maximum. This makes every
operation reproduce an exhaustive threshold sweep exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .core import fmt_float
from .errors import MpadError


def _as_scores(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise MpadError(f"{name} score list is empty")
    if not np.all(np.isfinite(arr)):
        raise MpadError(f"{name} scores contain non-finite values")
    return arr


def candidate_thresholds(*score_lists) -> np.ndarray:
    """Ascending sweep thresholds: midpoints of adjacent distinct pooled
    scores, plus sentinels standing in for -inf and +inf."""
    pooled = np.unique(np.concatenate([np.asarray(s, dtype=np.float64).ravel() for s in score_lists]))
    mids = (pooled[:-1] + pooled[1:]) / 2.0
    return np.concatenate([[pooled[0] - 1.0], mids, [pooled[-1] + 1.0]])


# ---------------------------------------------------------------------------
# biometric recognition rates (comparison scores)


def fmr_fnmr(genuine, impostor, threshold: float) -> tuple[float, float]:
    """False match rate and false non-match rate at a decision threshold.

    fmr = fraction of impostor scores >= threshold
    fnmr = fraction of genuine scores < threshold
    """
    gen = _as_scores(genuine, "genuine")
    imp = _as_scores(impostor, "impostor")
    fmr = int(np.count_nonzero(imp >= threshold)) / imp.size
    fnmr = int(np.count_nonzero(gen < threshold)) / gen.size
    return fmr, fnmr


class ThresholdAtFmr(NamedTuple):
    threshold: float
    fmr: float


def threshold_at_fmr(impostor, target_fmr: float) -> ThresholdAtFmr:
    """Smallest sweep threshold whose empirical FMR is <= target_fmr.

    Midpoint candidates give each threshold a distinct FMR, so no ties
    arise. When even one admitted impostor overshoots the target, the
    sentinel above the maximum score is returned with an achieved FMR
    of 0.
    """
    imp = _as_scores(impostor, "impostor")
    if not (0.0 < target_fmr <= 1.0):
        raise MpadError(f"target FMR must lie in (0, 1], got {target_fmr}")
    for t in candidate_thresholds(imp):
        achieved = int(np.count_nonzero(imp >= t)) / imp.size
        if achieved <= target_fmr:
            return ThresholdAtFmr(float(t), achieved)
    raise AssertionError("sweep must terminate at the upper sentinel")


def iapmr(attack_scores, threshold: float) -> float:
    """Fraction of attack comparison scores that match the target reference."""
    att = _as_scores(attack_scores, "attack")
    return int(np.count_nonzero(att >= threshold)) / att.size


def riapar(iapmr_value: float, fnmr_value: float) -> float:
    """1 + (IAPMR - (1 - FNMR)); ties attack success to recognition accuracy."""
    return 1.0 + (iapmr_value - (1.0 - fnmr_value))


# ---------------------------------------------------------------------------
# attack detection rates (detection scores)


def apcer_bpcer(attack_det, bonafide_det, threshold: float) -> tuple[float, float]:
    """Attack / bona fide presentation classification error rates.

    apcer = fraction of attack detection scores < threshold (missed attacks)
    bpcer = fraction of bona fide detection scores >= threshold (false alarms)
    """
    att = _as_scores(attack_det, "attack")
    bf = _as_scores(bonafide_det, "bona fide")
    apcer = int(np.count_nonzero(att < threshold)) / att.size
    bpcer = int(np.count_nonzero(bf >= threshold)) / bf.size
    return apcer, bpcer


def d_eer(attack_det, bonafide_det) -> tuple[float, float]:
    """Detection equal-error rate and the threshold attaining it.

    All sweep thresholds are evaluated; the threshold minimizing
    |apcer - bpcer| wins, with ties resolved toward lower bpcer and then
    the lower threshold. The returned rate is (apcer + bpcer) / 2 there.
    """
    att = _as_scores(attack_det, "attack")
    bf = _as_scores(bonafide_det, "bona fide")
    att_sorted = np.sort(att)
    bf_sorted = np.sort(bf)
    ts = candidate_thresholds(att, bf)
    apcers = np.searchsorted(att_sorted, ts, side="left") / att.size
    bpcers = (bf.size - np.searchsorted(bf_sorted, ts, side="left")) / bf.size
    best = None
    for t, a, b in zip(ts, apcers, bpcers):
        key = (abs(a - b), b, t)
        if best is None or key < best[0]:
            best = (key, (a + b) / 2.0, float(t))
    return best[1], best[2]


def bpcer_at_apcer(attack_det, bonafide_det, apcer_cap: float) -> float:
    """Lowest BPCER over operating points whose APCER is within the cap.

    APCER grows and BPCER shrinks as the threshold rises, so this is the
    BPCER at the largest compliant sweep threshold. The cap is always
    attainable: below every score APCER is 0.
    """
    if not (0.0 < apcer_cap < 1.0):
        raise MpadError(f"APCER cap must lie in (0, 1), got {apcer_cap}")
    att = _as_scores(attack_det, "attack")
    bf = _as_scores(bonafide_det, "bona fide")
    for t in candidate_thresholds(att, bf)[::-1]:
        apcer = int(np.count_nonzero(att < t)) / att.size
        if apcer <= apcer_cap:
            return int(np.count_nonzero(bf >= t)) / bf.size
    raise AssertionError("cap is attainable at the lower sentinel")


class DistributionStats(NamedTuple):
    mean: float
    st_dev: float
    minimum: float
    maximum: float


def distribution_stats(scores) -> DistributionStats:
    """Mean, population standard deviation (divide by N), min and max."""
    arr = _as_scores(scores, "score")
    return DistributionStats(
        mean=float(arr.mean()),
        st_dev=float(arr.std()),
        minimum=float(arr.min()),
        maximum=float(arr.max()),
    )


@dataclass(frozen=True, eq=False)
class DetCurve:
    """Detection error trade-off: (threshold, apcer, bpcer) rows in
    descending threshold order; score >= threshold classifies as attack."""

    thresholds: np.ndarray
    apcers: np.ndarray
    bpcers: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=np.float64)
        a = np.asarray(self.apcers, dtype=np.float64)
        b = np.asarray(self.bpcers, dtype=np.float64)
        if not (t.shape == a.shape == b.shape) or t.ndim != 1 or t.size == 0:
            raise ValueError("curve arrays must be non-empty and equal length")
        if np.any(np.diff(t) >= 0):
            raise ValueError("thresholds must strictly decrease")
        # as the threshold decreases, apcer may only fall and bpcer only rise
        if np.any(np.diff(a) > 0) or np.any(np.diff(b) < 0):
            raise ValueError("curve violates DET monotonicity")
        if a.min() < 0 or a.max() > 1 or b.min() < 0 or b.max() > 1:
            raise ValueError("rates must lie in [0, 1]")
        for name, arr in (("thresholds", t), ("apcers", a), ("bpcers", b)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.thresholds.size


def det_curve(attack_det, bonafide_det) -> DetCurve:
    """One (threshold, apcer, bpcer) point per sweep threshold."""
    att = _as_scores(attack_det, "attack")
    bf = _as_scores(bonafide_det, "bona fide")
    ts = candidate_thresholds(att, bf)[::-1]
    att_sorted = np.sort(att)
    bf_sorted = np.sort(bf)
    apcers = np.searchsorted(att_sorted, ts, side="left") / att.size
    bpcers = (bf.size - np.searchsorted(bf_sorted, ts, side="left")) / bf.size
    return DetCurve(thresholds=ts, apcers=apcers, bpcers=bpcers)


# ---------------------------------------------------------------------------
# vulnerability analysis report


class VulnerabilityRow(NamedTuple):
    target_fmr: float
    threshold: float
    fnmr: float
    iapmr: float
    riapar: float


@dataclass(frozen=True)
class VulnerabilityReport:
    """Per-FMR vulnerability rows plus per-class score statistics."""

    rows: tuple[VulnerabilityRow, ...]
    stats: dict[str, DistributionStats]


def vulnerability_report(genuine, impostor, attack, target_fmrs: Sequence[float]) -> VulnerabilityReport:
    """Assemble the vulnerability analysis from comparison score sets.

    ``target_fmrs`` are fractions in (0, 1]; each row fixes the decision
    threshold at that FMR and reports FNMR, IAPMR and RIAPAR there.
    """
    gen = _as_scores(genuine, "genuine")
    imp = _as_scores(impostor, "impostor")
    att = _as_scores(attack, "attack")
    rows = []
    for target in target_fmrs:
        t, _ = threshold_at_fmr(imp, target)
        _, fnmr = fmr_fnmr(gen, imp, t)
        ia = iapmr(att, t)
        rows.append(VulnerabilityRow(float(target), t, fnmr, ia, riapar(ia, fnmr)))
    stats = {
        "genuine": distribution_stats(gen),
        "impostor": distribution_stats(imp),
        "attack": distribution_stats(att),
    }
    return VulnerabilityReport(rows=tuple(rows), stats=stats)


# ---------------------------------------------------------------------------
# CSV export


def write_det_csv(curve: DetCurve, path) -> None:
    lines = ["threshold,apcer,bpcer"]
    for t, a, b in zip(curve.thresholds, curve.apcers, curve.bpcers):
        lines.append(f"{fmt_float(t)},{fmt_float(a)},{fmt_float(b)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_vulnerability_csv(report: VulnerabilityReport, path) -> None:
    """FMR, FNMR, IAPMR and RIAPAR columns, all in percent."""
    lines = ["FMR,FNMR,IAPMR,RIAPAR"]
    for row in report.rows:
        cells = (row.target_fmr, row.fnmr, row.iapmr, row.riapar)
        lines.append(",".join(fmt_float(100.0 * v) for v in cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_stats_csv(stats: dict[str, DistributionStats], path) -> None:
    lines = ["distribution,mean,st_dev,minimum,maximum"]
    for name, st in stats.items():
        lines.append(
            f"{name},{fmt_float(st.mean)},{fmt_float(st.st_dev)},{fmt_float(st.minimum)},{fmt_float(st.maximum)}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
