"""Seeded synthetic inlier/test data: standard normal inliers plus a
shifted-mean outlier cluster on the first two features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .data import LABEL_INLIER, LABEL_OUTLIER, Dataset
from .errors import InvalidSpec

_ROLE_INLIER = 0
_ROLE_TEST_INLIER = 1
_ROLE_OUTLIER = 2


@dataclass(frozen=True)
class SynthSpec:
    d: int
    n_inlier: int = 200
    n_test_inlier: int = 100
    n_test_outlier: int = 10
    mu: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.d < 2:
            raise InvalidSpec("d must be at least 2 (the mean shift uses two features)")
        if min(self.n_inlier, self.n_test_inlier, self.n_test_outlier) < 1:
            raise InvalidSpec("all sample counts must be at least 1")
        mu = self.mu
        if mu is None:
            mu = np.zeros(self.d)
            mu[0], mu[1] = 3.0, -2.0
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (self.d,):
            raise InvalidSpec(f"mu must be a {self.d}-vector")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)


def _normals(shape, seed: int, role: int, trial: int) -> np.ndarray:
    """Standard normals from a counter-based Philox stream keyed by
    (seed, role, trial); variates via the inverse Gaussian CDF."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(role, trial))
    rng = np.random.Generator(np.random.Philox(seed=ss))
    u = rng.random(size=shape)
    tiny = 2.0**-53
    return ndtri(np.clip(u, tiny, 1.0 - tiny))


def feature_names(d: int) -> tuple[str, ...]:
    return tuple(f"f{k + 1}" for k in range(d))


def generate(spec: SynthSpec, trial: int = 0):
    """Draw (inliers, test, test_labels) for one trial.

    Inliers and test inliers are N(0, I); test outliers are N(mu, I).
    Output is fully determined by (spec.seed, trial).
    """
    names = feature_names(spec.d)
    inl = _normals((spec.d, spec.n_inlier), spec.seed, _ROLE_INLIER, trial)
    test_in = _normals((spec.d, spec.n_test_inlier), spec.seed, _ROLE_TEST_INLIER, trial)
    test_out = (
        _normals((spec.d, spec.n_test_outlier), spec.seed, _ROLE_OUTLIER, trial)
        + spec.mu[:, None]
    )
    inliers = Dataset(
        features=inl,
        feature_names=names,
        sample_ids=tuple(f"inlier{i}" for i in range(spec.n_inlier)),
    )
    test = Dataset(
        features=np.hstack([test_in, test_out]),
        feature_names=names,
        sample_ids=tuple(f"test{i}" for i in range(spec.n_test_inlier + spec.n_test_outlier)),
    )
    labels = [LABEL_INLIER] * spec.n_test_inlier + [LABEL_OUTLIER] * spec.n_test_outlier
    return inliers, test, labels
