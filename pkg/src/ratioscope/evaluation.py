"""ROC/AUC computation, run aggregation, and Welch's t-test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .data import LABEL_INLIER, LABEL_OUTLIER
from .errors import SingleClass, TooFewSamples
from .scores import ScoreSet


@dataclass(frozen=True)
class RunSummary:
    method: str
    auc_values: tuple[float, ...]
    mean: float
    std: float


def _split_scores(scores: ScoreSet):
    if scores.labels is None:
        raise SingleClass("scores carry no ground-truth labels")
    s = scores.scores
    labels = np.asarray(scores.labels)
    inl = s[labels == LABEL_INLIER]
    out = s[labels == LABEL_OUTLIER]
    if len(inl) == 0 or len(out) == 0:
        raise SingleClass("both inlier and outlier labels are required")
    return inl, out


def auc(scores: ScoreSet) -> float:
    """P(outlier score < inlier score) + half credit for ties.

    Computed with midranks: outliers are expected to receive low
    scores under the higher-is-more-inlier orientation.
    """
    inl, out = _split_scores(scores)
    ranks = stats.rankdata(np.concatenate([inl, out]))
    r_inl = np.sum(ranks[: len(inl)])
    n1, n0 = len(inl), len(out)
    return float((r_inl - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def roc_curve(scores: ScoreSet) -> np.ndarray:
    """(fpr, tpr) staircase over distinct score thresholds.

    Inliers are the positive class (score above threshold); the curve
    runs from (0, 0) to (1, 1) and its trapezoidal area equals auc().
    """
    inl, out = _split_scores(scores)
    thresholds = np.unique(np.concatenate([inl, out]))[::-1]
    points = [(0.0, 0.0)]
    for t in thresholds:
        tpr = float(np.mean(inl >= t))
        fpr = float(np.mean(out >= t))
        points.append((fpr, tpr))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    return np.asarray(points)


def roc_auc(points: np.ndarray) -> float:
    """Trapezoidal area under an roc_curve() staircase."""
    fpr = points[:, 0]
    tpr = points[:, 1]
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def welch_ttest(a, b, paired: bool = False) -> float:
    """Two-sided p-value; Welch-Satterthwaite df by default, paired
    Student's t on differences when ``paired`` is set."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise TooFewSamples("t-test needs at least 2 values per sample")
    if paired:
        if len(a) != len(b):
            raise TooFewSamples("paired t-test needs equal-length samples")
        diff = a - b
        vd = diff.var(ddof=1)
        if vd == 0:
            return 1.0 if diff.mean() == 0 else 0.0
        t = diff.mean() / np.sqrt(vd / len(diff))
        df = len(diff) - 1
    else:
        va = a.var(ddof=1)
        vb = b.var(ddof=1)
        if va == 0 and vb == 0:
            return 1.0 if a.mean() == b.mean() else 0.0
        se2 = va / len(a) + vb / len(b)
        t = (a.mean() - b.mean()) / np.sqrt(se2)
        df = se2**2 / (
            (va / len(a)) ** 2 / (len(a) - 1) + (vb / len(b)) ** 2 / (len(b) - 1)
        )
    # two-sided tail via the regularized incomplete beta
    return float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))


def summarize(method: str, auc_values) -> RunSummary:
    """Mean and sample std (m-1 denominator; 0 for a single value)."""
    values = tuple(float(v) for v in auc_values)
    arr = np.asarray(values)
    std = float(arr.std(ddof=1)) if len(values) > 1 else 0.0
    return RunSummary(
        method=method, auc_values=values, mean=float(arr.mean()), std=std
    )
