"""Ratio scores, threshold detection, and per-sample feature explanations."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .data import LABEL_INLIER, LABEL_OUTLIER, PooledDataset
from .errors import DimensionMismatch, NegativeThreshold, UnknownSample
from .llr import WeightMatrix

EXP_CLAMP = 500.0


@dataclass(frozen=True)
class ScoreSet:
    """Per-sample ratio scores; higher means more inlier-like."""

    sample_ids: tuple[str, ...]
    scores: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != len(self.sample_ids):
                raise DimensionMismatch("labels and sample ids differ in length")
        if scores.shape != (len(self.sample_ids),):
            raise DimensionMismatch("scores and sample ids differ in length")
        if not np.all(np.isfinite(scores)) or np.any(scores <= 0):
            raise DimensionMismatch("scores must be strictly positive and finite")


@dataclass(frozen=True)
class Explanation:
    """Top features of one sample's coefficient column, by |weight|."""

    sample_id: str
    ranked_features: tuple[tuple[str, float], ...]
    score: float


def _column_indices(pooled: PooledDataset, which: str) -> np.ndarray:
    if which == "test":
        return np.arange(pooled.n_inlier, pooled.m)
    if which == "inlier":
        return np.arange(pooled.n_inlier)
    if which == "all":
        return np.arange(pooled.m)
    raise ValueError(f"unknown sample selector {which!r}")


def ratio_score(
    weights: WeightMatrix,
    pooled: PooledDataset,
    which: str = "test",
    labels=None,
) -> ScoreSet:
    """Score (n/n') * exp(w_i . x_i) for the selected pooled columns.

    The exponent is clamped to +-500 so scores saturate instead of
    overflowing.  ``labels`` (inlier/outlier strings aligned with the
    selection) are attached when given.
    """
    if weights.values.shape != pooled.features.shape:
        raise DimensionMismatch("weights do not align with pooled columns")
    idx = _column_indices(pooled, which)
    prior = pooled.n_test / pooled.n_inlier
    z = np.einsum(
        "ki,ki->i", weights.values[:, idx], pooled.features[:, idx]
    )
    scores = prior * np.exp(np.clip(z, -EXP_CLAMP, EXP_CLAMP))
    ids = tuple(pooled.sample_ids[i] for i in idx)
    return ScoreSet(sample_ids=ids, scores=scores, labels=labels)


def detect(scores: ScoreSet, tau: float) -> tuple[str, ...]:
    """Flag samples with score <= tau as outliers."""
    if tau < 0:
        raise NegativeThreshold(f"tau must be nonnegative, got {tau}")
    return tuple(
        LABEL_OUTLIER if s <= tau else LABEL_INLIER for s in scores.scores
    )


def explain(
    weights: WeightMatrix,
    pooled: PooledDataset,
    sample_id: str,
    top_k: int,
) -> Explanation:
    """Top-k features of one sample's column ranked by |weight|,
    ties broken by feature index."""
    if top_k < 1:
        raise ValueError("top_k must be at least 1")
    try:
        col = pooled.sample_ids.index(sample_id)
    except ValueError:
        raise UnknownSample(f"no sample with id {sample_id!r}") from None
    w = weights.values[:, col]
    order = sorted(range(len(w)), key=lambda k: (-abs(w[k]), k))[:top_k]
    prior = pooled.n_test / pooled.n_inlier
    z = float(np.dot(w, pooled.features[:, col]))
    score = prior * float(np.exp(np.clip(z, -EXP_CLAMP, EXP_CLAMP)))
    ranked = tuple((pooled.feature_names[k], float(w[k])) for k in order)
    return Explanation(sample_id=sample_id, ranked_features=ranked, score=score)


def save_scores_csv(path, scores: ScoreSet, decisions=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["sample_id", "score"]
        if decisions is not None:
            header.append("decision")
        if scores.labels is not None:
            header.append("label")
        writer.writerow(header)
        for i, sid in enumerate(scores.sample_ids):
            row = [sid, repr(float(scores.scores[i]))]
            if decisions is not None:
                row.append(decisions[i])
            if scores.labels is not None:
                row.append(scores.labels[i])
            writer.writerow(row)


def load_scores_csv(path) -> tuple[ScoreSet, tuple[str, ...] | None]:
    """Read a scores CSV back; returns (ScoreSet, decisions or None)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    header = rows[0]
    cols = {name: k for k, name in enumerate(header)}
    ids, scores, labels, decisions = [], [], [], []
    for row in rows[1:]:
        ids.append(row[cols["sample_id"]])
        scores.append(float(row[cols["score"]]))
        if "label" in cols:
            labels.append(row[cols["label"]])
        if "decision" in cols:
            decisions.append(row[cols["decision"]])
    return (
        ScoreSet(
            sample_ids=tuple(ids),
            scores=np.asarray(scores),
            labels=tuple(labels) if labels else None,
        ),
        tuple(decisions) if decisions else None,
    )


def save_explanations_json(path, explanations) -> None:
    doc = [
        {
            "sample_id": e.sample_id,
            "score": e.score,
            "features": [{"name": n, "weight": w} for n, w in e.ranked_features],
        }
        for e in explanations
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
