"""Benchmark harness: seeded trials, method registry, aggregation.

Each trial builds an (inliers, test, labels) triple, standardizes by
inlier statistics, runs every requested method, and records the AUC.
Trials fan out over a thread pool; results are keyed by
(dim, trial, method) so the output is independent of scheduling.
"""

from __future__ import annotations

import os
import sys
import numpy as np

from concurrent.futures import ThreadPoolExecutor

from . import baselines, llr
from .data import (
    LABEL_INLIER,
    LABEL_OUTLIER,
    Dataset,
    apply_standardizer,
    fit_standardizer,
    pool,
)
from .evaluation import auc, summarize, welch_ttest
from .graph import median_heuristic
from .scores import ScoreSet, ratio_score, save_scores_csv
from .synth import SynthSpec, generate

METHODS = ("llr", "kde", "lof", "osvm", "l1lr", "kliep", "ulsif", "rulsif")

THREADS_ENV = "RATIO_SCOPE_THREADS"

DEFAULT_PARAMS = {
    "lambda1": 0.1,
    "lambda2": 1.0,
    "k_neighbors": 7,
    "epsilon": 1e-10,
    "outer_max_iters": 100,
    "outer_rel_tol": 1e-6,
    "lof_k": 10,
    "osvm_nu": 0.1,
    "l1lr_lambda": 0.1,
    "ulsif_nu": 0.1,
    "rulsif_beta": 0.5,
    "standardize": True,
}


def _trial_seed(seed: int, dim: int, trial: int) -> int:
    # stable scalar key for basis subsampling inside baselines
    return (seed * 1000003 + dim * 1009 + trial) % (2**63)


def run_method(
    method: str,
    inliers: Dataset,
    test: Dataset,
    labels,
    params: dict,
    seed: int,
) -> ScoreSet:
    """Run one detector and return test-sample scores with labels."""
    pooled = pool(inliers, test)
    if method == "llr":
        hp = llr.LlrHyperparams(
            lambda1=params["lambda1"],
            lambda2=params["lambda2"],
            k_neighbors=min(params["k_neighbors"], pooled.m - 1),
            epsilon=params["epsilon"],
            outer_max_iters=params["outer_max_iters"],
            outer_rel_tol=params["outer_rel_tol"],
        )
        result = llr.fit_pooled(pooled, hp)
        base = ratio_score(result.weights, pooled, which="test")
        return ScoreSet(base.sample_ids, base.scores, tuple(labels))
    if method == "kde":
        sigma = median_heuristic(inliers.features)
        s = baselines.kde_fit_score(inliers, test, sigma)
    elif method == "lof":
        s = baselines.lof_score(inliers, test, min(params["lof_k"], inliers.m - 1))
    elif method == "osvm":
        sigma = median_heuristic(pooled.features)
        merged = Dataset(
            features=pooled.features,
            feature_names=pooled.feature_names,
            sample_ids=pooled.sample_ids,
        )
        model = baselines.osvm_fit(merged, params["osvm_nu"], sigma)
        s = baselines.osvm_score(model, test)
    elif method == "l1lr":
        model = baselines.l1lr_fit(pooled, params["l1lr_lambda"])
        s = baselines.l1lr_score(model, test, pooled.n_test, pooled.n_inlier)
    elif method == "kliep":
        tau = median_heuristic(pooled.features)
        model = baselines.kliep_fit(inliers, test, tau, seed=seed)
        s = baselines.kernel_model_score(model, test, clamp_nonneg=True)
    elif method in ("ulsif", "rulsif"):
        sigma = median_heuristic(pooled.features)
        beta = 1.0 if method == "ulsif" else params["rulsif_beta"]
        model = baselines.rulsif_fit(
            inliers, test, beta, params["ulsif_nu"], sigma, seed=seed
        )
        s = baselines.kernel_model_score(model, test, clamp_nonneg=True)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ScoreSet(s.sample_ids, s.scores, tuple(labels))


def standardized_trial(inliers: Dataset, test: Dataset, standardize: bool):
    if not standardize:
        return inliers, test
    stats = fit_standardizer(inliers)
    return apply_standardizer(inliers, stats), apply_standardizer(test, stats)


def resplit_dataset(data: Dataset, labels, n_outliers: int, seed: int, trial: int):
    """Real-data protocol: half the inlier class as model samples, the
    remaining inliers plus up to n_outliers sampled outliers as test."""
    labels = np.asarray(labels)
    inl_idx = np.flatnonzero(labels == LABEL_INLIER)
    out_idx = np.flatnonzero(labels == LABEL_OUTLIER)
    rng = np.random.Generator(
        np.random.Philox(seed=np.random.SeedSequence(entropy=seed, spawn_key=(3, trial)))
    )
    inl_perm = rng.permutation(inl_idx)
    half = len(inl_idx) // 2
    model_idx = np.sort(inl_perm[:half])
    test_inl_idx = np.sort(inl_perm[half:])
    if len(out_idx) < n_outliers:
        print(
            f"warning: only {len(out_idx)} outliers available, using all",
            file=sys.stderr,
        )
        picked_out = out_idx
    else:
        picked_out = np.sort(rng.choice(out_idx, size=n_outliers, replace=False))
    inliers = Dataset(
        features=data.features[:, model_idx],
        feature_names=data.feature_names,
        sample_ids=tuple(data.sample_ids[i] for i in model_idx),
    )
    test_idx = np.concatenate([test_inl_idx, picked_out])
    test = Dataset(
        features=data.features[:, test_idx],
        feature_names=data.feature_names,
        sample_ids=tuple(data.sample_ids[i] for i in test_idx),
    )
    test_labels = [LABEL_INLIER] * len(test_inl_idx) + [LABEL_OUTLIER] * len(picked_out)
    return inliers, test, test_labels


def default_thread_count(requested: int | None) -> int:
    if requested is not None and requested >= 1:
        return requested
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def run_bench(
    dims,
    trials: int,
    methods,
    seed: int,
    params: dict | None = None,
    dataset: Dataset | None = None,
    dataset_labels=None,
    dataset_name: str = "synthetic",
    threads: int | None = None,
    dump_scores_dir=None,
):
    """Run the (dim x trial x method) sweep and aggregate.

    Returns (results_doc, sweep_rows, n_failures).  A method failing on
    a trial records null for that AUC and processing continues.
    """
    params = {**DEFAULT_PARAMS, **(params or {})}
    tasks = [(dim, trial) for dim in dims for trial in range(trials)]
    results: dict[tuple[int, int, str], float | None] = {}

    def run_one(dim, trial):
        if dataset is None:
            spec = SynthSpec(d=dim, seed=seed)
            inliers, test, labels = generate(spec, trial=trial)
        else:
            inliers, test, labels = resplit_dataset(
                dataset, dataset_labels, 10, seed, trial
            )
        inliers, test = standardized_trial(inliers, test, params["standardize"])
        out = {}
        for method in methods:
            try:
                s = run_method(
                    method, inliers, test, labels, params, _trial_seed(seed, dim, trial)
                )
                out[method] = (auc(s), s)
            except Exception as exc:  # record and continue
                print(
                    f"warning: {method} failed on dim={dim} trial={trial}: {exc}",
                    file=sys.stderr,
                )
                out[method] = (None, None)
        return dim, trial, out

    n_threads = default_thread_count(threads)
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool_:
            for dim, trial, out in pool_.map(lambda t: run_one(*t), tasks):
                for method, (value, s) in out.items():
                    results[(dim, trial, method)] = value
                    _maybe_dump(dump_scores_dir, dim, trial, method, s)
    else:
        for dim, trial in tasks:
            dim, trial, out = run_one(dim, trial)
            for method, (value, s) in out.items():
                results[(dim, trial, method)] = value
                _maybe_dump(dump_scores_dir, dim, trial, method, s)

    per_dim = []
    sweep_rows = []
    n_failures = 0
    for dim in dims:
        method_entries = []
        auc_lists = {}
        for method in methods:
            values = [results[(dim, t, method)] for t in range(trials)]
            n_failures += sum(1 for v in values if v is None)
            ok = [v for v in values if v is not None]
            if ok:
                s = summarize(method, ok)
                mean, std = s.mean, s.std
            else:
                mean, std = None, None
            auc_lists[method] = ok
            method_entries.append(
                {"name": method, "mean": mean, "std": std, "auc_values": values}
            )
            sweep_rows.append((dim, method, mean, std))
        pairwise = {}
        for i, a in enumerate(methods):
            for b_ in methods[i + 1 :]:
                if len(auc_lists[a]) >= 2 and len(auc_lists[b_]) >= 2:
                    pairwise[f"{a}|{b_}"] = welch_ttest(auc_lists[a], auc_lists[b_])
        per_dim.append(
            {"dim": dim, "methods": method_entries, "pairwise_p": pairwise}
        )
    doc = {
        "dataset": dataset_name,
        "seed": seed,
        "trials": trials,
        "dims": list(dims),
        "per_dim": per_dim,
    }
    return doc, sweep_rows, n_failures


def _maybe_dump(dump_dir, dim, trial, method, s: ScoreSet | None):
    if dump_dir is None or s is None:
        return
    os.makedirs(dump_dir, exist_ok=True)
    path = os.path.join(dump_dir, f"scores_d{dim}_t{trial}_{method}.csv")
    save_scores_csv(path, s)


def format_table(per_dim_entry, alpha: float = 0.05) -> str:
    """Text table with '*' marking the best mean AUC and every method
    statistically comparable to it (Welch p >= alpha)."""
    methods = [m for m in per_dim_entry["methods"] if m["mean"] is not None]
    if not methods:
        return "(no successful trials)"
    best = max(methods, key=lambda m: m["mean"])
    pairwise = per_dim_entry["pairwise_p"]
    lines = [f"dim={per_dim_entry['dim']}"]
    for m in methods:
        starred = m["name"] == best["name"]
        if not starred:
            key = f"{best['name']}|{m['name']}"
            alt = f"{m['name']}|{best['name']}"
            p = pairwise.get(key, pairwise.get(alt))
            starred = p is not None and p >= alpha
        mark = "*" if starred else " "
        lines.append(f"  {mark} {m['name']:<8s} {m['mean']:.3f} ({m['std']:.3f})")
    return "\n".join(lines)
