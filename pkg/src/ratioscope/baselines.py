"""Reference detectors sharing the ScoreSet contract.

All methods emit scores with the same orientation as the ratio
detector: higher = more inlier-like.  Density methods return densities,
LOF returns the inverse factor, ratio methods return the estimated
inlier/test ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.special import expit, logsumexp

from .data import Dataset, PooledDataset
from .errors import (
    AllZeroAlphas,
    DimensionMismatch,
    InfeasibleNu,
    InvalidK,
    SingularSystem,
)
from .graph import pairwise_sq_dists
from .scores import EXP_CLAMP, ScoreSet

SCORE_FLOOR = 1e-12
DIST_FLOOR = 1e-12
DEFAULT_BASIS = 100


@dataclass(frozen=True)
class KernelModel:
    """Gaussian kernel expansion sum_l alpha_l exp(-||x - c_l||^2 / 2 sigma2)."""

    centers: np.ndarray
    alphas: np.ndarray
    sigma2: float
    kind: str


@dataclass(frozen=True)
class LinearModel:
    w: np.ndarray
    lam: float
    converged: bool = True


def gauss_design(query: np.ndarray, centers: np.ndarray, sigma2: float) -> np.ndarray:
    """Design matrix Phi[i, l] = kernel(query_i, center_l)."""
    return np.exp(-pairwise_sq_dists(query, centers) / (2.0 * sigma2))


def _subsample_centers(samples: np.ndarray, b: int, seed: int) -> np.ndarray:
    m = samples.shape[1]
    if b >= m:
        return samples
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(m, size=b, replace=False))
    return samples[:, idx]


# ---------------------------------------------------------------------------
# KDE

def kde_fit_score(inliers: Dataset, query: Dataset, sigma: float) -> ScoreSet:
    """Gaussian kernel density of each query point under the inliers."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if inliers.d != query.d:
        raise DimensionMismatch("inlier and query dimensions differ")
    d, n = inliers.d, inliers.m
    d2 = pairwise_sq_dists(query.features, inliers.features)
    logp = (
        logsumexp(-d2 / (2.0 * sigma**2), axis=1)
        - np.log(n)
        - 0.5 * d * np.log(2.0 * np.pi * sigma**2)
    )
    scores = np.exp(np.clip(logp, -EXP_CLAMP, EXP_CLAMP))
    return ScoreSet(sample_ids=query.sample_ids, scores=scores)


# ---------------------------------------------------------------------------
# LOF

def lof_score(reference: Dataset, query: Dataset, K: int) -> ScoreSet:
    """Inverted local outlier factor (1/LOF, higher = more inlier).

    g(z) is the inverse mean distance from z to its K nearest reference
    neighbors (self excluded for reference points); LOF averages the
    neighbors' g over the query's own g.
    """
    if K < 1 or K >= reference.m:
        raise InvalidK(f"K must satisfy 1 <= K < reference.m, got {K}")
    if reference.d != query.d:
        raise DimensionMismatch("reference and query dimensions differ")
    ref = reference.features
    rd = np.sqrt(pairwise_sq_dists(ref, ref))
    np.fill_diagonal(rd, np.inf)
    rd_sorted = np.sort(rd, axis=1)[:, :K]
    g_ref = 1.0 / np.maximum(rd_sorted.mean(axis=1), DIST_FLOOR)

    qd = np.sqrt(pairwise_sq_dists(query.features, ref))
    # a query coinciding with a reference point is that point: drop one
    # zero distance, mirroring the self-exclusion for reference points
    self_col = np.argmin(qd, axis=1)
    rows = np.arange(qd.shape[0])
    hit = qd[rows, self_col] < DIST_FLOOR
    qd[rows[hit], self_col[hit]] = np.inf
    nearest = np.argsort(qd, axis=1, kind="stable")[:, :K]
    qd_near = np.take_along_axis(qd, nearest, axis=1)
    g_query = 1.0 / np.maximum(qd_near.mean(axis=1), DIST_FLOOR)
    lof = g_ref[nearest].mean(axis=1) / g_query
    return ScoreSet(sample_ids=query.sample_ids, scores=1.0 / np.maximum(lof, SCORE_FLOOR))


# ---------------------------------------------------------------------------
# One-class SVM

def project_box_simplex(v: np.ndarray, c: float) -> np.ndarray:
    """Euclidean projection onto {0 <= a <= c, sum(a) = 1} by bisection."""
    n = len(v)
    if c * n < 1.0 - 1e-12:
        raise InfeasibleNu("box cap too small for the simplex constraint")
    lo = np.min(v) - c - 1.0
    hi = np.max(v)
    for _ in range(200):
        theta = 0.5 * (lo + hi)
        total = np.sum(np.clip(v - theta, 0.0, c))
        if total > 1.0:
            lo = theta
        else:
            hi = theta
    return np.clip(v - 0.5 * (lo + hi), 0.0, c)


def osvm_fit(
    samples: Dataset,
    nu: float,
    sigma: float,
    max_iters: int = 5000,
    kkt_tol: float = 1e-6,
) -> KernelModel:
    """Solve the one-class SVM dual by projected gradient descent."""
    if not 0 < nu <= 1:
        raise InfeasibleNu(f"nu must lie in (0, 1], got {nu}")
    n = samples.m
    c = 1.0 / (n * nu)
    if c * n < 1.0:
        raise InfeasibleNu("nu makes the dual infeasible")
    X = samples.features
    K = gauss_design(X, X, sigma**2)
    if abs(c * n - 1.0) < 1e-15:
        # nu = 1: the box meets the simplex at the single point alpha = 1/n
        alpha = np.full(n, c)
        return KernelModel(centers=X, alphas=alpha, sigma2=sigma**2, kind="osvm")
    L = float(np.linalg.eigvalsh(K)[-1])
    step = 1.0 / max(L, 1e-12)
    alpha = project_box_simplex(np.full(n, 1.0 / n), c)
    for _ in range(max_iters):
        g = K @ alpha
        alpha_new = project_box_simplex(alpha - step * g, c)
        if np.max(np.abs(alpha_new - alpha)) <= kkt_tol * step:
            alpha = alpha_new
            break
        alpha = alpha_new
    return KernelModel(centers=X, alphas=alpha, sigma2=sigma**2, kind="osvm")


def osvm_score(model: KernelModel, query: Dataset) -> ScoreSet:
    """Decision value sum_k alpha_k K(x_k, x); no offset (ranking only)."""
    phi = gauss_design(query.features, model.centers, model.sigma2)
    scores = np.maximum(phi @ model.alphas, SCORE_FLOOR)
    return ScoreSet(sample_ids=query.sample_ids, scores=scores)


def osvm_dual_objective(model: KernelModel) -> float:
    K = gauss_design(model.centers, model.centers, model.sigma2)
    return 0.5 * float(model.alphas @ K @ model.alphas)


# ---------------------------------------------------------------------------
# l1-regularized logistic regression

def _lr_loss_grad(w: np.ndarray, X: np.ndarray, y: np.ndarray):
    z = y * (X.T @ w)
    loss = float(np.sum(np.logaddexp(0.0, -z)))
    grad = X @ (-y * expit(-z))
    return loss, grad


def l1lr_subgrad_residual(w: np.ndarray, grad: np.ndarray, lam: float) -> float:
    """Max violation of the l1 optimality conditions."""
    res = np.where(
        w != 0.0,
        np.abs(grad + lam * np.sign(w)),
        np.maximum(np.abs(grad) - lam, 0.0),
    )
    return float(np.max(res))


def l1lr_fit(
    pooled: PooledDataset,
    lam: float,
    max_iters: int = 20000,
    tol: float = 1e-5,
) -> LinearModel:
    """Proximal gradient (soft-thresholding) with backtracking on the
    smooth-part Lipschitz estimate."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    X = pooled.features
    y = pooled.labels.astype(float)
    w = np.zeros(pooled.d)
    loss, grad = _lr_loss_grad(w, X, y)
    L = 1.0
    converged = False
    for _ in range(max_iters):
        if l1lr_subgrad_residual(w, grad, lam) <= tol:
            converged = True
            break
        while True:
            w_new = w - grad / L
            w_new = np.sign(w_new) * np.maximum(np.abs(w_new) - lam / L, 0.0)
            delta = w_new - w
            loss_new, grad_new = _lr_loss_grad(w_new, X, y)
            if loss_new <= loss + grad @ delta + 0.5 * L * float(delta @ delta) + 1e-12:
                break
            L *= 2.0
        w, loss, grad = w_new, loss_new, grad_new
        L = max(L * 0.9, 1e-6)  # allow the estimate to shrink again
    return LinearModel(w=w, lam=lam, converged=converged)


def l1lr_score(model: LinearModel, query: Dataset, n_test: int, n_inlier: int) -> ScoreSet:
    z = np.clip(query.features.T @ model.w, -EXP_CLAMP, EXP_CLAMP)
    scores = (n_test / n_inlier) * np.exp(z)
    return ScoreSet(sample_ids=query.sample_ids, scores=scores)


# ---------------------------------------------------------------------------
# KLIEP

def kliep_fit(
    inliers: Dataset,
    test: Dataset,
    tau: float,
    max_iters: int = 2000,
    tol: float = 1e-7,
    b: int = DEFAULT_BASIS,
    seed: int = 0,
) -> KernelModel:
    """Fit the inlier/test ratio by constrained log-likelihood ascent.

    Log-likelihood runs over the numerator (inlier) samples; the mean
    of the model over the denominator (test) samples is renormalized to
    1 after every step, and alpha stays entrywise nonnegative.  Use
    kliep_fit_with_trace to also get the ascent objective trace.
    """
    model, _ = kliep_fit_with_trace(inliers, test, tau, max_iters, tol, b, seed)
    return model


def kliep_fit_with_trace(
    inliers: Dataset,
    test: Dataset,
    tau: float,
    max_iters: int = 2000,
    tol: float = 1e-7,
    b: int = DEFAULT_BASIS,
    seed: int = 0,
):
    if tau <= 0:
        raise ValueError("tau must be positive")
    centers = _subsample_centers(inliers.features, min(b, inliers.m), seed)
    sigma2 = tau**2
    phi_nu = gauss_design(inliers.features, centers, sigma2)  # numerator terms
    phi_de = gauss_design(test.features, centers, sigma2)  # constraint terms

    def normalize(a):
        mean_de = float(np.mean(phi_de @ a))
        if mean_de <= 0:
            raise AllZeroAlphas("projection annihilated alpha (degenerate width)")
        return a / mean_de

    def objective(a):
        vals = phi_nu @ a
        if np.any(vals <= 0):
            return -np.inf
        return float(np.sum(np.log(vals)))

    alpha = normalize(np.ones(centers.shape[1]))
    f = objective(alpha)
    trace = [f]
    eta = 1.0
    n_nu = inliers.m
    de_mean = phi_de.mean(axis=0)
    for _ in range(max_iters):
        # gradient of the renormalized objective
        # sum log(phi_nu a) - n log(mean(phi_de a))
        g = phi_nu.T @ (1.0 / (phi_nu @ alpha)) - n_nu * de_mean / float(
            np.mean(phi_de @ alpha)
        )
        improved = False
        while eta >= 1e-14:
            cand = np.maximum(alpha + eta * g, 0.0)
            if not np.any(cand > 0):
                eta *= 0.5
                continue
            cand = normalize(cand)
            f_cand = objective(cand)
            if f_cand >= f:
                improved = f_cand > f + tol * (1.0 + abs(f))
                alpha, f = cand, f_cand
                trace.append(f)
                eta *= 1.5
                break
            eta *= 0.5
        if not improved:
            break
    model = KernelModel(centers=centers, alphas=alpha, sigma2=sigma2, kind="kliep")
    return model, trace


def kliep_constraint_value(model: KernelModel, test: Dataset) -> float:
    phi_de = gauss_design(test.features, model.centers, model.sigma2)
    return float(np.mean(phi_de @ model.alphas))


# ---------------------------------------------------------------------------
# uLSIF / RuLSIF

def rulsif_fit(
    inliers: Dataset,
    test: Dataset,
    beta: float,
    nu: float,
    sigma: float,
    b: int = DEFAULT_BASIS,
    seed: int = 0,
) -> KernelModel:
    """Closed-form (relative) least-squares importance fit.

    beta = 1 estimates the plain inlier/test ratio (uLSIF); beta in
    (0, 1) mixes the denominator toward the inlier density.
    """
    if not 0 <= beta <= 1:
        raise ValueError("beta must lie in [0, 1]")
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    centers = _subsample_centers(inliers.features, min(b, inliers.m), seed)
    sigma2 = sigma**2
    phi_in = gauss_design(inliers.features, centers, sigma2)
    phi_te = gauss_design(test.features, centers, sigma2)
    H = (1.0 - beta) / inliers.m * (phi_in.T @ phi_in) + beta / test.m * (
        phi_te.T @ phi_te
    )
    h = phi_in.mean(axis=0)
    A = H + nu * np.eye(H.shape[0])
    try:
        factor = sla.cho_factor(A)
        alpha = sla.cho_solve(factor, h)
    except sla.LinAlgError as exc:
        raise SingularSystem(
            "kernel Gram matrix is rank-deficient; use nu > 0"
        ) from exc
    residual = np.linalg.norm(A @ alpha - h)
    if residual > 1e-8 * max(np.linalg.norm(h), 1e-300):
        alpha = np.linalg.solve(A, h)
        residual = np.linalg.norm(A @ alpha - h)
        if residual > 1e-8 * max(np.linalg.norm(h), 1e-300):
            raise SingularSystem("linear solve failed to reach residual tolerance")
    kind = "ulsif" if beta == 1.0 else "rulsif"
    return KernelModel(centers=centers, alphas=alpha, sigma2=sigma2, kind=kind)


def kernel_model_score(
    model: KernelModel, query: Dataset, clamp_nonneg: bool = True
) -> ScoreSet:
    """Evaluate sum_l alpha_l kernel(x, c_l) at the query points."""
    phi = gauss_design(query.features, model.centers, model.sigma2)
    scores = phi @ model.alphas
    floor = SCORE_FLOOR if clamp_nonneg else 1e-300
    scores = np.maximum(scores, floor)
    return ScoreSet(sample_ids=query.sample_ids, scores=scores)
