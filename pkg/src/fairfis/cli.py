"""Command-line entry point: ``fairfis {simulate,train,importance,surrogate,replicate}``.

Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .data import DataError, load_dataset, load_predictions, write_dataset
from .ensemble import (
    fit_gradient_boosting,
    fit_random_forest,
    model_from_dict,
    model_importance,
    model_predict,
    model_to_dict,
)
from .fairness import BiasMetric, MetricError, model_bias, write_scores_csv, write_scores_json
from .simulate import SimulationSpec, large_p_spec, run_replicates, simulate, write_sidecar
from .surrogate import fit_surrogate
from .svg import importance_chart
from .tree import TreeConfig, fit_tree

DEFAULT_SEED = 20240101


class UsageError(Exception):
    pass


def _dump(doc, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="delimited input file")
    p.add_argument("--target", required=True, help="target column (name, or index with --no-header)")
    p.add_argument("--protected", required=True, help="protected-attribute column")
    p.add_argument("--protected-positive", default=None, help="value of the protected column mapped to 1")
    p.add_argument("--ignore", default="", help="comma-separated columns to drop")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--task", choices=("classification", "regression"), default="classification")


def _add_metric_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--metric", choices=("dp", "eqop"), default="dp")
    p.add_argument("--positive-class", type=int, default=1)
    p.add_argument("--multiclass-reduction", choices=("l1", "max"), default="l1")


def _add_tree_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-samples-split", type=int, default=2)
    p.add_argument("--min-samples-leaf", type=int, default=1)


def _metric(args) -> BiasMetric:
    return BiasMetric(args.metric.upper(), args.positive_class, args.multiclass_reduction)


def _check_metric_task(args, task: str) -> None:
    if args.metric == "eqop" and task == "regression":
        raise UsageError("EQOP requires classification")


def _load(args):
    ignore = [c for c in args.ignore.split(",") if c]
    return load_dataset(
        args.data,
        args.target,
        args.protected,
        protected_positive=args.protected_positive,
        ignore=ignore,
        header=not args.no_header,
        delimiter=args.delimiter,
        task=args.task,
    )


def _tree_cfg(args, seed: int, default_depth=None) -> TreeConfig:
    depth = args.max_depth if args.max_depth is not None else default_depth
    return TreeConfig(depth, args.min_samples_split, args.min_samples_leaf, rng_seed=seed)


def _performance(d, preds, metric: BiasMetric) -> dict:
    out = {}
    if d.y.is_classification:
        out["accuracy"] = float(np.mean(preds == d.y.values))
    else:
        out["mse"] = float(np.mean((preds - d.y.values) ** 2))
    out["fairness"] = 1.0 - model_bias(preds, d.y, d.z, metric)
    return out


def cmd_simulate(args) -> int:
    kw = dict(
        scenario=args.scenario, task=args.task, n=args.n, pi_z=args.pi_z, alpha=args.alpha,
        beta=args.beta, sigma=args.sigma, seed=args.seed,
    )
    spec = large_p_spec(**kw) if args.large_p else SimulationSpec(p=args.p, **kw)
    d = simulate(spec)
    write_dataset(d, args.out)
    write_sidecar(spec, args.spec_out or f"{args.out}.json")
    print(f"wrote {d.n} rows x {d.p} features to {args.out}")
    return 0


def cmd_train(args) -> int:
    _check_metric_task(args, args.task)
    metric = _metric(args)
    d = _load(args)
    if args.model == "tree":
        model = fit_tree(d, args.task, _tree_cfg(args, args.seed))
    elif args.model == "forest":
        model = fit_random_forest(
            d, args.task, args.n_trees, _tree_cfg(args, args.seed),
            bootstrap=not args.no_bootstrap, seed=args.seed, n_jobs=args.threads,
        )
    else:
        model = fit_gradient_boosting(
            d, args.task, args.n_stages, args.learning_rate, _tree_cfg(args, args.seed, default_depth=3), seed=args.seed
        )
    _dump(model_to_dict(model, d.feature_names), args.out)
    perf = _performance(d, model_predict(model, d.x), metric)
    for key, value in perf.items():
        print(f"{key}: {value:.6f}")
    return 0


def _read_model(path):
    try:
        doc = json.loads(Path(path).read_text())
        return model_from_dict(doc), doc.get("feature_names")
    except FileNotFoundError:
        raise DataError(f"missing file: {path}") from None
    except (json.JSONDecodeError, ValueError, AttributeError) as exc:
        raise DataError(f"corrupted model file {path}: {exc}") from None


def _emit_scores(scores, args, groups=None) -> None:
    if args.format == "json":
        write_scores_json(scores, args.out)
    else:
        write_scores_csv(scores, args.out, groups)
    if args.svg:
        Path(args.svg).write_text(importance_chart(scores.names(), scores.fis, scores.fairfis))


def cmd_importance(args) -> int:
    model, names = _read_model(args.model_file)
    _check_metric_task(args, model.task)
    d = _load(args)
    if d.p != model.n_features:
        raise DataError(f"feature count mismatch: model has {model.n_features}, dataset has {d.p}")
    scores = model_importance(model, _metric(args), names or d.feature_names)
    _emit_scores(scores, args)
    for key, value in _performance(d, model_predict(model, d.x), _metric(args)).items():
        print(f"{key}: {value:.6f}")
    return 0


def cmd_surrogate(args) -> int:
    _check_metric_task(args, args.task)
    d = _load(args)
    preds = load_predictions(args.predictions, d.n)
    report = fit_surrogate(d, preds, args.task, _metric(args))
    _dump(report.to_dict(), args.out)
    if args.scores_out:
        write_scores_csv(report.scores, args.scores_out)
    if args.svg:
        Path(args.svg).write_text(importance_chart(report.scores.names(), report.scores.fis, report.scores.fairfis))
    print(f"fidelity: {report.fidelity:.6f}")
    if report.black_box_accuracy is not None:
        print(f"black_box_accuracy: {report.black_box_accuracy:.6f}")
    if report.black_box_fairness is not None:
        print(f"black_box_fairness: {report.black_box_fairness:.6f}")
    return 0


def cmd_replicate(args) -> int:
    _check_metric_task(args, args.task)
    kw = dict(scenario=args.scenario, task=args.task, n=args.n, sigma=args.sigma, seed=args.seed)
    spec = large_p_spec(**kw) if args.large_p else SimulationSpec(p=args.p, **kw)
    summary = run_replicates(
        spec, args.model, _metric(args), args.reps, n_trees=args.n_trees, n_stages=args.n_stages,
        learning_rate=args.learning_rate, n_jobs=args.threads,
    )
    summary.write_csv(args.out)
    for g, vals in summary.group_means().items():
        print(f"{g}: mean_fis={vals['fis']:.4f} mean_fairfis={vals['fairfis']:+.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairfis", description="Accuracy and fairness feature importance for trees.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--scenario", choices=("linear", "additive_sin", "interactions"), default="linear")
    p.add_argument("--task", choices=("classification", "regression"), default="classification")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--p", type=int, default=12)
    p.add_argument("--pi-z", type=float, default=0.2)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--sigma", choices=("identity", "ar_precision"), default="identity")
    p.add_argument("--large-p", action="store_true", help="p=250 with 5 features per group")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.add_argument("--spec-out", default=None, help="JSON sidecar path (default: OUT.json)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="fit a tree, forest or boosting model")
    _add_data_args(p)
    _add_metric_args(p)
    _add_tree_args(p)
    p.add_argument("--model", choices=("tree", "forest", "boosting"), default="tree")
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--no-bootstrap", action="store_true")
    p.add_argument("--n-stages", type=int, default=100)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("importance", help="score features of a fitted model")
    p.add_argument("--model-file", required=True)
    _add_data_args(p)
    _add_metric_args(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default=None, help="optional bar-chart path")
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("surrogate", help="explain black-box predictions with a tree surrogate")
    _add_data_args(p)
    _add_metric_args(p)
    p.add_argument("--predictions", required=True, help="single-column predictions file")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--scores-out", default=None, help="optional scores CSV path")
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_surrogate)

    p = sub.add_parser("replicate", help="average scores over simulated replicates")
    p.add_argument("--scenario", choices=("linear", "additive_sin", "interactions"), default="linear")
    p.add_argument("--task", choices=("classification", "regression"), default="classification")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--p", type=int, default=12)
    p.add_argument("--sigma", choices=("identity", "ar_precision"), default="identity")
    p.add_argument("--large-p", action="store_true")
    p.add_argument("--model", choices=("tree", "forest", "boosting"), default="tree")
    _add_metric_args(p)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--n-stages", type=int, default=100)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="scores-summary CSV path")
    p.set_defaults(func=cmd_replicate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, MetricError) as exc:
        print(f"fairfis {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ValueError, OSError) as exc:
        print(f"fairfis {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
