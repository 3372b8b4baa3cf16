"""Localized logistic regression fit by majorize-minimize iterations.

Each pooled sample i owns a coefficient column w_i.  The objective is

    J(W) = sum_i log(1 + exp(-y_i w_i.x_i))
         + lambda1 * sum_{i,j} r_ij ||w_i - w_j||_2
         + lambda2 * sum_i ||w_i||_1^2

with the double sum running over all ordered pairs of pooled samples.
Norms are smoothed as sqrt(. + eps) so that the reweighting matrices
stay finite and the outer loop provably never increases the traced
objective; eps defaults to 1e-10 and eps=0 recovers the exact norms.

The outer loop freezes the reweighting matrices Cg (a graph Laplacian
over samples) and Ce (entrywise positive), minimizes the resulting
smooth convex surrogate with nonlinear conjugate gradients, and
repeats.  The surrogate plus the anchor constant from
``majorization_constant`` is tangent to J at the anchor and dominates
it everywhere, which yields the monotone-descent guarantee.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.optimize import line_search, minimize
from scipy.optimize._linesearch import LineSearchWarning
from scipy.special import expit

from .data import Dataset, PooledDataset, StandardizationStats, pool
from .errors import DimensionMismatch, LineSearchFailure, NonDecrease
from .graph import SimilarityGraph, knn_graph, median_heuristic

SIGMA2_AUTO = "auto"


@dataclass(frozen=True)
class WeightMatrix:
    """d x (n + n') matrix whose column i is the coefficient vector w_i."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionMismatch("weight matrix must be 2-D")
        if not np.all(np.isfinite(values)):
            raise DimensionMismatch("weight matrix entries must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LlrHyperparams:
    lambda1: float = 0.1
    lambda2: float = 1.0
    k_neighbors: int = 7
    sigma2: float | str = SIGMA2_AUTO
    epsilon: float = 1e-10
    outer_max_iters: int = 100
    outer_rel_tol: float = 1e-6
    inner_max_iters: int = 500
    inner_grad_tol: float = 1e-6

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("regularization parameters must be nonnegative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.outer_rel_tol <= 0 or self.inner_grad_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.outer_max_iters < 1 or self.inner_max_iters < 1:
            raise ValueError("iteration limits must be at least 1")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be at least 1")
        if self.sigma2 != SIGMA2_AUTO and not (
            isinstance(self.sigma2, (int, float)) and self.sigma2 > 0
        ):
            raise ValueError("sigma2 must be positive or 'auto'")


@dataclass(frozen=True)
class FitResult:
    weights: WeightMatrix
    objective_trace: tuple[float, ...]
    converged: bool
    iterations: int
    graph: SimilarityGraph = field(repr=False, compare=False, default=None)


def _check_dims(W: np.ndarray, pooled: PooledDataset):
    if W.shape != pooled.features.shape:
        raise DimensionMismatch(
            f"weights {W.shape} do not match pooled features {pooled.features.shape}"
        )


def _logistic_loss(W: np.ndarray, pooled: PooledDataset) -> float:
    z = pooled.labels * np.einsum("ki,ki->i", W, pooled.features)
    return float(np.sum(np.logaddexp(0.0, -z)))


def _smooth_l1(W: np.ndarray, epsilon: float) -> np.ndarray:
    """Per-column smoothed l1 norms sum_k sqrt(w_k^2 + eps)."""
    return np.sum(np.sqrt(W * W + epsilon), axis=0)


def _edge_dists(W: np.ndarray, graph: SimilarityGraph, epsilon: float):
    """(rows, cols, r, s) over nonzero graph entries, s the smoothed
    column distance sqrt(||w_i - w_j||^2 + eps)."""
    coo = graph.weights.tocoo()
    diff = W[:, coo.row] - W[:, coo.col]
    s = np.sqrt(np.sum(diff * diff, axis=0) + epsilon)
    return coo.row, coo.col, coo.data, s


def objective_J(
    W: WeightMatrix,
    pooled: PooledDataset,
    graph: SimilarityGraph,
    hp: LlrHyperparams,
    epsilon: float | None = None,
) -> float:
    """Value of J(W); ``epsilon`` overrides hp.epsilon (0 = exact norms)."""
    Wv = W.values
    _check_dims(Wv, pooled)
    eps = hp.epsilon if epsilon is None else epsilon
    value = _logistic_loss(Wv, pooled)
    if hp.lambda1 > 0:
        _, _, r, s = _edge_dists(Wv, graph, eps)
        value += hp.lambda1 * float(np.dot(r, s))
    if hp.lambda2 > 0:
        if eps > 0:
            l1 = _smooth_l1(Wv, eps)
        else:
            l1 = np.sum(np.abs(Wv), axis=0)
        value += hp.lambda2 * float(np.sum(l1 * l1))
    return value


def majorizer_Cg(
    W: WeightMatrix, graph: SimilarityGraph, epsilon: float
) -> sp.csr_matrix:
    """Reweighted graph Laplacian with edge weights r_ij / s_ij."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    rows, cols, r, s = _edge_dists(W.values, graph, epsilon)
    a = r / s
    m = graph.m
    A = sp.csr_matrix((a, (rows, cols)), shape=(m, m))
    deg = np.asarray(A.sum(axis=1)).ravel()
    return (sp.diags(deg) - A).tocsr()


def majorizer_Ce(W: WeightMatrix, epsilon: float) -> np.ndarray:
    """Entrywise reweighting ||w_j||_{1,eps} / sqrt(W_kj^2 + eps)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    Wv = W.values
    smooth = np.sqrt(Wv * Wv + epsilon)
    return smooth.sum(axis=0)[None, :] / smooth


def majorization_constant(
    W_anchor: WeightMatrix,
    graph: SimilarityGraph,
    hp: LlrHyperparams,
    epsilon: float | None = None,
) -> float:
    """Anchor constant c_t with J(W) <= surrogate(W) + c_t everywhere
    and equality at the anchor.

    Fused part: the ordered-pair sum of r_ij s_ij is bounded by
    tr(W Cg W^T) plus (1/2) sum_ordered r_ij (s_ij^t + eps / s_ij^t).
    Exclusive part: Cauchy-Schwarz leaves the cross term
    lambda2 * eps * sum_j ||w_j||_{1,eps} sum_k 1/sqrt(w_kj^2 + eps).
    """
    eps = hp.epsilon if epsilon is None else epsilon
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    Wv = W_anchor.values
    c = 0.0
    if hp.lambda1 > 0:
        _, _, r, s = _edge_dists(Wv, graph, eps)
        c += hp.lambda1 * 0.5 * float(np.dot(r, s + eps / s))
    if hp.lambda2 > 0:
        smooth = np.sqrt(Wv * Wv + eps)
        c += hp.lambda2 * eps * float(np.sum(smooth.sum(axis=0) * np.sum(1.0 / smooth, axis=0)))
    return c


def surrogate_Jtilde(
    W: WeightMatrix,
    Cg: sp.spmatrix,
    Ce: np.ndarray,
    pooled: PooledDataset,
    hp: LlrHyperparams,
) -> float:
    Wv = W.values
    _check_dims(Wv, pooled)
    return _surrogate_value(Wv, Cg, Ce, pooled, hp)


def _surrogate_value(Wv, Cg, Ce, pooled, hp) -> float:
    value = _logistic_loss(Wv, pooled)
    if hp.lambda1 > 0:
        WCg = (Cg.T @ Wv.T).T
        value += hp.lambda1 * float(np.sum(Wv * WCg))
    if hp.lambda2 > 0:
        value += hp.lambda2 * float(np.sum(Ce * Wv * Wv))
    return value


def grad_Jtilde(
    W: WeightMatrix,
    Cg: sp.spmatrix,
    Ce: np.ndarray,
    pooled: PooledDataset,
    hp: LlrHyperparams,
) -> np.ndarray:
    Wv = W.values
    _check_dims(Wv, pooled)
    return _surrogate_grad(Wv, Cg, Ce, pooled, hp)


def _surrogate_grad(Wv, Cg, Ce, pooled, hp) -> np.ndarray:
    X = pooled.features
    y = pooled.labels
    z = y * np.einsum("ki,ki->i", Wv, X)
    g = (-y * expit(-z))[None, :] * X
    if hp.lambda1 > 0:
        g = g + 2.0 * hp.lambda1 * (Cg.T @ Wv.T).T
    if hp.lambda2 > 0:
        g = g + 2.0 * hp.lambda2 * Ce * Wv
    return g


def _inner_preconditioner(Cg, Ce, pooled, hp) -> np.ndarray:
    """Diagonal curvature estimate of the surrogate: logistic curvature
    bound 1/4 x^2 plus the quadratic penalty diagonals.  The exclusive
    weights span many orders of magnitude (up to ~1/sqrt(eps) for
    near-zero coordinates), which cripples unpreconditioned CG."""
    diag = 0.25 * pooled.features**2
    if hp.lambda1 > 0:
        diag = diag + 2.0 * hp.lambda1 * Cg.diagonal()[None, :]
    if hp.lambda2 > 0:
        diag = diag + 2.0 * hp.lambda2 * Ce
    return np.maximum(diag, 1e-12)


def solve_inner(
    pooled: PooledDataset,
    Cg: sp.spmatrix,
    Ce: np.ndarray,
    hp: LlrHyperparams,
    W0: WeightMatrix,
) -> WeightMatrix:
    """Minimize the surrogate with preconditioned Polak-Ribiere+
    conjugate gradients, never increasing the surrogate value.

    Steps use a strong-Wolfe line search (CG needs accurate steps to
    keep directions conjugate) with Armijo backtracking as a fallback.
    Stops when ||grad||_F <= inner_grad_tol * (1 + |Jtilde|) or after
    inner_max_iters iterations; if the iteration cap is hit first the
    iterate is polished with monotone L-BFGS, which copes better with
    the near-singular curvature of extreme regularization regimes.
    """
    shape = W0.values.shape
    _check_dims(W0.values, pooled)

    def f_flat(x):
        return _surrogate_value(x.reshape(shape), Cg, Ce, pooled, hp)

    def g_flat(x):
        return _surrogate_grad(x.reshape(shape), Cg, Ce, pooled, hp).ravel()

    M = _inner_preconditioner(Cg, Ce, pooled, hp).ravel()
    x = np.array(W0.values, dtype=float).ravel()
    f = f_flat(x)
    g = g_flat(x)
    y = g / M
    p = -y
    gy = float(g @ y)
    armijo = 1e-4

    for _ in range(hp.inner_max_iters):
        if np.linalg.norm(g) <= hp.inner_grad_tol * (1.0 + abs(f)):
            break
        slope = float(g @ p)
        if slope >= 0:  # restart on a non-descent direction
            p = -y
            slope = -gy
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LineSearchWarning)
            alpha, _, _, f_new, _, g_new = line_search(
                f_flat, g_flat, x, p, gfk=g, old_fval=f, c2=0.1
            )
        if alpha is None or not f_new <= f:
            alpha, g_new = 1.0, None
            while True:
                f_new = f_flat(x + alpha * p)
                if f_new <= f + armijo * alpha * slope:
                    break
                alpha *= 0.5
                if alpha < 1e-20:
                    raise LineSearchFailure(
                        "no decreasing step at machine precision "
                        "(ill-conditioned surrogate)"
                    )
        x = x + alpha * p
        if g_new is None:
            g_new = g_flat(x)
        y_new = g_new / M
        gy_new = float(g_new @ y_new)
        beta = max(0.0, float(y_new @ (g_new - g)) / gy)
        p = -y_new + beta * p
        f, g, y, gy = f_new, g_new, y_new, gy_new

    if np.linalg.norm(g) > hp.inner_grad_tol * (1.0 + abs(f)):
        res = minimize(
            f_flat,
            x,
            jac=g_flat,
            method="L-BFGS-B",
            options={
                "maxiter": hp.inner_max_iters,
                "ftol": 1e-16,
                "gtol": hp.inner_grad_tol / np.sqrt(x.size),
            },
        )
        if res.fun <= f:
            x = res.x

    return WeightMatrix(values=x.reshape(shape))


def resolve_sigma2(pooled: PooledDataset, hp: LlrHyperparams) -> float:
    if hp.sigma2 == SIGMA2_AUTO:
        return median_heuristic(pooled.features) ** 2
    return float(hp.sigma2)


def build_graph(pooled: PooledDataset, hp: LlrHyperparams) -> SimilarityGraph:
    sigma2 = resolve_sigma2(pooled, hp)
    K = min(hp.k_neighbors, pooled.m - 1)
    return knn_graph(pooled.features, K, sigma2)


def fit_pooled(
    pooled: PooledDataset,
    hp: LlrHyperparams,
    graph: SimilarityGraph | None = None,
) -> FitResult:
    """Run the outer reweighting loop on already-pooled data."""
    if graph is None:
        graph = build_graph(pooled, hp)
    W = WeightMatrix(values=np.zeros_like(pooled.features))
    trace = [objective_J(W, pooled, graph, hp)]
    converged = False
    iterations = 0
    for _ in range(hp.outer_max_iters):
        Cg = majorizer_Cg(W, graph, hp.epsilon)
        Ce = majorizer_Ce(W, hp.epsilon)
        W = solve_inner(pooled, Cg, Ce, hp, W)
        J = objective_J(W, pooled, graph, hp)
        prev = trace[-1]
        if J > prev + 1e-8 * (1.0 + abs(prev)):
            raise NonDecrease(
                f"objective increased from {prev!r} to {J!r}; this is a bug"
            )
        trace.append(J)
        iterations += 1
        if abs(prev - J) < hp.outer_rel_tol * (1.0 + abs(prev)):
            converged = True
            break
    return FitResult(
        weights=W,
        objective_trace=tuple(trace),
        converged=converged,
        iterations=iterations,
        graph=graph,
    )


def fit(inliers: Dataset, test: Dataset, hp: LlrHyperparams) -> FitResult:
    """Pool the data, build the similarity graph, and fit the weights."""
    return fit_pooled(pool(inliers, test), hp)


def save_model(
    path,
    result: FitResult,
    pooled: PooledDataset,
    hp: LlrHyperparams,
    sigma2: float,
    stats: StandardizationStats | None,
) -> None:
    doc = {
        "feature_names": list(pooled.feature_names),
        "n_inlier": pooled.n_inlier,
        "n_test": pooled.n_test,
        "lambda1": hp.lambda1,
        "lambda2": hp.lambda2,
        "k_neighbors": hp.k_neighbors,
        "sigma2": sigma2,
        "epsilon": hp.epsilon,
        "weights": [float(v) for v in result.weights.values.ravel(order="C")],
        "objective_trace": list(result.objective_trace),
        "standardizer": None
        if stats is None
        else {"mean": stats.mean.tolist(), "scale": stats.scale.tolist()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path) -> dict:
    """Load a model JSON document; "weights" becomes a d x (n+n') array."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    d = len(doc["feature_names"])
    m = doc["n_inlier"] + doc["n_test"]
    doc["weights"] = np.asarray(doc["weights"], dtype=float).reshape(d, m)
    if doc.get("standardizer") is not None:
        std = doc["standardizer"]
        doc["standardizer"] = StandardizationStats(
            mean=np.asarray(std["mean"], dtype=float),
            scale=np.asarray(std["scale"], dtype=float),
        )
    return doc


def with_sigma2(hp: LlrHyperparams, sigma2: float) -> LlrHyperparams:
    return replace(hp, sigma2=sigma2)
