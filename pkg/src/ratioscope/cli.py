"""Command-line interface: synth, fit, score, bench, eval.

Exit codes: 0 success, 1 computational failure, 2 usage/input error.
A JSON config file (--config) mirrors the flags; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import harness, llr
from .data import (
    Dataset,
    apply_standardizer,
    fit_standardizer,
    load_csv,
    pool,
    save_csv,
)
from .errors import RatioscopeError
from .evaluation import auc, roc_curve
from .scores import (
    detect,
    explain,
    load_scores_csv,
    ratio_score,
    save_explanations_json,
    save_scores_csv,
)
from .synth import SynthSpec, generate

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

CONST_FEATURE = "__const__"


class UsageError(Exception):
    pass


def _augment_intercept(data: Dataset) -> Dataset:
    ones = np.ones((1, data.m))
    return Dataset(
        features=np.vstack([data.features, ones]),
        feature_names=data.feature_names + (CONST_FEATURE,),
        sample_ids=data.sample_ids,
    )


def _load_pair(args):
    inliers, _ = load_csv(args.inliers, id_prefix="in-")
    test, test_labels = load_csv(args.test, id_prefix="te-")
    if args.intercept:
        inliers = _augment_intercept(inliers)
        test = _augment_intercept(test)
    stats = None
    if not args.no_standardize:
        stats = fit_standardizer(inliers)
        inliers = apply_standardizer(inliers, stats)
        test = apply_standardizer(test, stats)
    return inliers, test, test_labels, stats


def _hyperparams(args) -> llr.LlrHyperparams:
    sigma2 = args.sigma2
    if isinstance(sigma2, str) and sigma2 != llr.SIGMA2_AUTO:
        sigma2 = float(sigma2)
    return llr.LlrHyperparams(
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        k_neighbors=args.k,
        sigma2=sigma2,
        epsilon=args.epsilon,
        outer_max_iters=args.max_outer,
        outer_rel_tol=args.tol,
    )


def cmd_synth(args) -> int:
    spec = SynthSpec(
        d=args.d,
        n_inlier=args.n_inlier,
        n_test_inlier=args.n_test_inlier,
        n_test_outlier=args.n_outlier,
        seed=args.seed,
    )
    inliers, test, labels = generate(spec, trial=args.trial)
    os.makedirs(args.out_dir, exist_ok=True)
    save_csv(os.path.join(args.out_dir, "inliers.csv"), inliers)
    save_csv(os.path.join(args.out_dir, "test.csv"), test, labels=labels)
    print(f"wrote {args.out_dir}/inliers.csv and {args.out_dir}/test.csv")
    return EXIT_OK


def cmd_fit(args) -> int:
    inliers, test, _, stats = _load_pair(args)
    hp = _hyperparams(args)
    pooled = pool(inliers, test)
    sigma2 = llr.resolve_sigma2(pooled, hp)
    graph = llr.build_graph(pooled, llr.with_sigma2(hp, sigma2))
    result = llr.fit_pooled(pooled, hp, graph=graph)
    llr.save_model(args.out, result, pooled, hp, sigma2, stats)
    print(
        f"final objective {result.objective_trace[-1]:.6f} "
        f"after {result.iterations} iterations "
        f"(converged={result.converged})"
    )
    return EXIT_OK


def cmd_score(args) -> int:
    model = llr.load_model(args.model)
    inliers, _ = load_csv(args.inliers, id_prefix="in-")
    test, test_labels = load_csv(args.test, id_prefix="te-")
    if model["feature_names"] and model["feature_names"][-1] == CONST_FEATURE:
        inliers = _augment_intercept(inliers)
        test = _augment_intercept(test)
    if inliers.m != model["n_inlier"] or test.m != model["n_test"]:
        raise UsageError(
            "sample counts do not match the model "
            f"(expected {model['n_inlier']}+{model['n_test']})"
        )
    stats = model.get("standardizer")
    if stats is not None:
        inliers = apply_standardizer(inliers, stats)
        test = apply_standardizer(test, stats)
    pooled = pool(inliers, test)
    weights = llr.WeightMatrix(values=model["weights"])
    labels = tuple(test_labels) if (test_labels and args.which == "test") else None
    scores = ratio_score(weights, pooled, which=args.which, labels=labels)
    decisions = detect(scores, args.tau) if args.tau is not None else None
    save_scores_csv(args.out, scores, decisions=decisions)
    if args.explain_top is not None:
        flagged = (
            [sid for sid, dec in zip(scores.sample_ids, decisions) if dec == "outlier"]
            if decisions is not None
            else list(scores.sample_ids)
        )
        explanations = []
        for sid in flagged:
            e = explain(weights, pooled, sid, args.explain_top)
            ranked = tuple(
                (n, w) for n, w in e.ranked_features if n != CONST_FEATURE
            )
            explanations.append(type(e)(e.sample_id, ranked, e.score))
        out = args.explain_out or (os.path.splitext(args.out)[0] + "_explanations.json")
        save_explanations_json(out, explanations)
        print(f"wrote {len(explanations)} explanations to {out}")
    print(f"wrote {len(scores.sample_ids)} scores to {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in harness.METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {harness.METHODS}")
    dims = [int(v) for v in args.dims.split(",") if v.strip()]
    dataset = dataset_labels = None
    dataset_name = "synthetic"
    if args.dataset:
        dataset, dataset_labels = load_csv(args.dataset)
        if dataset_labels is None:
            raise UsageError("benchmark dataset CSV needs a label column")
        dataset_name = args.dataset
    params = {
        "lambda1": args.lambda1,
        "lambda2": args.lambda2,
        "k_neighbors": args.k,
        "epsilon": args.epsilon,
        "outer_max_iters": args.max_outer,
        "outer_rel_tol": args.tol,
        "lof_k": args.lof_k,
        "osvm_nu": args.osvm_nu,
        "l1lr_lambda": args.l1lr_lambda,
        "ulsif_nu": args.ulsif_nu,
        "rulsif_beta": args.rulsif_beta,
        "standardize": not args.no_standardize,
    }
    doc, sweep_rows, n_failures = harness.run_bench(
        dims,
        args.trials,
        methods,
        args.seed,
        params=params,
        dataset=dataset,
        dataset_labels=dataset_labels,
        dataset_name=dataset_name,
        threads=args.threads,
        dump_scores_dir=args.dump_scores,
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
    sweep_path = args.sweep_csv or (os.path.splitext(args.out)[0] + "_sweep.csv")
    with open(sweep_path, "w", encoding="utf-8") as fh:
        fh.write("dim,method,mean_auc,std\n")
        for dim, method, mean, std in sweep_rows:
            mtxt = "" if mean is None else repr(mean)
            stxt = "" if std is None else repr(std)
            fh.write(f"{dim},{method},{mtxt},{stxt}\n")
    for entry in doc["per_dim"]:
        print(harness.format_table(entry))
    if n_failures:
        print(f"{n_failures} trial/method runs failed", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_eval(args) -> int:
    scores, _ = load_scores_csv(args.scores)
    if scores.labels is None:
        raise UsageError("scores file has no label column")
    value = auc(scores)
    points = roc_curve(scores)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("fpr,tpr\n")
            for fpr, tpr in points:
                fh.write(f"{float(fpr)!r},{float(tpr)!r}\n")
    print(f"AUC {value!r}")
    return EXIT_OK


def _add_llr_flags(p):
    p.add_argument("--lambda1", type=float, default=0.1)
    p.add_argument("--lambda2", type=float, default=1.0)
    p.add_argument("--k", type=int, default=7)
    p.add_argument("--sigma2", default=llr.SIGMA2_AUTO)
    p.add_argument("--epsilon", type=float, default=1e-10)
    p.add_argument("--max-outer", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--intercept", action="store_true",
                   help="append a constant-1 feature (excluded from explanations)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ratioscope",
        description="Inlier-based outlier detection with per-sample feature attribution",
    )
    parser.add_argument("--config", help="JSON file of flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic inlier/test CSVs")
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--n-inlier", type=int, default=200)
    p.add_argument("--n-test-inlier", type=int, default=100)
    p.add_argument("--n-outlier", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit the localized ratio model")
    p.add_argument("--inliers", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", default="model.json")
    _add_llr_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="score samples with a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--inliers", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", default="scores.csv")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--which", choices=["test", "inlier", "all"], default="test")
    p.add_argument("--explain-top", type=int, default=None)
    p.add_argument("--explain-out", default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bench", help="run the benchmark sweep")
    p.add_argument("--methods", default=",".join(harness.METHODS[:-1]))
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--dims", default="10")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="results.json")
    p.add_argument("--sweep-csv", default=None)
    p.add_argument("--dataset", default=None,
                   help="CSV with label column; resplit per trial instead of synthetic data")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--dump-scores", default=None)
    p.add_argument("--lof-k", type=int, default=10)
    p.add_argument("--osvm-nu", type=float, default=0.1)
    p.add_argument("--l1lr-lambda", type=float, default=0.1)
    p.add_argument("--ulsif-nu", type=float, default=0.1)
    p.add_argument("--rulsif-beta", type=float, default=0.5)
    _add_llr_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="AUC/ROC report for a scores CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    return parser


def _apply_config(parser, argv):
    """Pre-parse --config and install its values as subparser defaults."""
    if "--config" not in argv:
        return
    idx = argv.index("--config")
    with open(argv[idx + 1], encoding="utf-8") as fh:
        config = json.load(fh)
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            sp.set_defaults(**{
                k.replace("-", "_"): v
                for k, v in config.items()
                if any(k.replace("-", "_") == a.dest for a in sp._actions)
            })


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RatioscopeError as exc:
        # construction/validation errors are input problems; solver
        # assertions are computational failures
        from .errors import LineSearchFailure, NonDecrease, SingularSystem

        if isinstance(exc, (LineSearchFailure, NonDecrease, SingularSystem)):
            print(f"solver failure: {exc}", file=sys.stderr)
            return EXIT_FAILURE
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
