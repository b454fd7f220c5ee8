"""Command line interface for the policy citation prediction toolkit."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError, PolicyCiteError
from .evaluation import EvalReport, confusion, kfold, mean_metrics, metrics, split_indices
from .experiment import (
    BUILTIN_GENSPEC,
    STAGE_IDS,
    ExperimentConfig,
    derive_seed,
    fit_model,
    run_experiment,
    write_report,
)
from .features import (
    ArticleRecord,
    FEATURE_ORDER,
    balance_indices,
    binarize_label,
    load_records,
    records_to_set,
    write_records_csv,
)
from .forest import RandomForest
from .naive_bayes import MultinomialNB
from .ranking import rank_features
from .svm import SvmClassifier
from .synth import default_genspec, generate, load_genspec


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="experiment config JSON")
    parser.add_argument("--seed", type=int, metavar="U64", help="override the config seed")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument(
        "--format",
        choices=("json", "markdown"),
        default="markdown",
        help="stdout format for printed results",
    )


def _add_input(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", required=True, metavar="PATH", help="record file")
    parser.add_argument(
        "--input-format", choices=("csv", "jsonl"), default="csv", help="record file format"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="policycite",
        description=(
            "Predict whether research articles get cited in public policy "
            "documents from their online-attention mention counts."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a raw record file and write the canonical CSV")
    _add_input(p)
    _add_common(p)

    p = sub.add_parser("synth", help="generate synthetic labeled records")
    p.add_argument("--genspec", metavar="PATH", help="generation spec JSON (default: builtin)")
    p.add_argument("--rows", type=int, metavar="N", help="override the spec's row count")
    _add_common(p)

    p = sub.add_parser("balance", help="undersample the majority class to equal counts")
    _add_input(p)
    _add_common(p)

    p = sub.add_parser("split", help="stratified train/test split")
    _add_input(p)
    p.add_argument(
        "--test-fraction", type=float, metavar="F", help="override the config test fraction"
    )
    _add_common(p)

    p = sub.add_parser("train", help="fit one model on every input row")
    _add_input(p)
    p.add_argument("--model", required=True, choices=("mnb", "rf", "svm"))
    p.add_argument(
        "--dump-tree",
        type=int,
        metavar="I",
        help="pretty-print tree I of a fitted forest to stdout",
    )
    _add_common(p)

    p = sub.add_parser("evaluate", help="score a saved model against labeled records")
    _add_input(p)
    p.add_argument("--model-file", required=True, metavar="PATH", help="saved model JSON")
    _add_common(p)

    p = sub.add_parser("cv", help="stratified k-fold cross-validation of the configured models")
    _add_input(p)
    p.add_argument("--folds", type=int, metavar="K", help="override the config fold count")
    _add_common(p)

    p = sub.add_parser("rank", help="feature ranking of a saved model")
    p.add_argument("--model-file", required=True, metavar="PATH", help="saved model JSON")
    _add_common(p)

    p = sub.add_parser("run", help="full pipeline: data, CV, holdout, rankings, report")
    p.add_argument(
        "--dump-tree",
        type=int,
        metavar="I",
        help="pretty-print tree I of the fitted forest to stdout",
    )
    _add_common(p)

    return parser


def _effective_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    return dataclasses.replace(config, **overrides) if overrides else config


def _out_dir(args: argparse.Namespace, config: ExperimentConfig) -> Path:
    out = Path(args.out) if args.out is not None else Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_model(path: str) -> MultinomialNB | RandomForest | SvmClassifier:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ParseError(f"model file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    kind = data.get("model") if isinstance(data, dict) else None
    loaders = {
        "mnb": MultinomialNB.from_dict,
        "rf": RandomForest.from_dict,
        "svm": SvmClassifier.from_dict,
    }
    if kind not in loaders:
        raise ParseError(f"{path}: not a saved model file (missing or unknown 'model' tag)")
    try:
        return loaders[kind](data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed {kind} model: {exc}") from None


def _print_metrics(report: EvalReport, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(report.to_json_dict(), indent=2, sort_keys=True))
    else:
        print(report.to_markdown())


def _dump_tree(forest: RandomForest, index: int) -> None:
    if not 0 <= index < forest.n_trees:
        raise ConfigError(f"--dump-tree index {index} out of range (forest has {forest.n_trees})")
    print(json.dumps(forest.trees[index].to_dict(feature_names=True), indent=2))


def cmd_ingest(args: argparse.Namespace, config: ExperimentConfig) -> int:
    records = load_records(args.input, args.input_format)
    rows = records_to_set(records, provenance=args.input)
    out = _out_dir(args, config) / "dataset.csv"
    write_records_csv(records, out)
    neg, pos = rows.class_counts()
    print(f"ingested {len(rows)} records ({neg} negative, {pos} positive) -> {out}")
    return 0


def cmd_synth(args: argparse.Namespace, config: ExperimentConfig) -> int:
    spec = load_genspec(args.genspec) if args.genspec else default_genspec()
    spec = spec.with_overrides(rows=args.rows, seed=args.seed)
    rows = generate(spec)
    records = [
        ArticleRecord(
            article_id=f"synth-{i:07d}",
            mentions={name: int(v) for name, v in zip(FEATURE_ORDER, rows.values[i])},
            policy_count=int(rows.labels[i]),
        )
        for i in range(len(rows))
    ]
    out = _out_dir(args, config) / "dataset.csv"
    write_records_csv(records, out)
    neg, pos = rows.class_counts()
    print(f"generated {len(rows)} rows ({neg} negative, {pos} positive) -> {out}")
    return 0


def cmd_balance(args: argparse.Namespace, config: ExperimentConfig) -> int:
    records = load_records(args.input, args.input_format)
    labels = np.array([binarize_label(r.policy_count) for r in records], dtype=bool)
    idx = balance_indices(labels, seed=config.seed)
    out = _out_dir(args, config) / "balanced.csv"
    write_records_csv([records[i] for i in idx], out)
    per_class = len(idx) // 2
    print(f"balanced {len(records)} records to {len(idx)} ({per_class} per class) -> {out}")
    return 0


def cmd_split(args: argparse.Namespace, config: ExperimentConfig) -> int:
    records = load_records(args.input, args.input_format)
    labels = np.array([binarize_label(r.policy_count) for r in records], dtype=bool)
    fraction = args.test_fraction if args.test_fraction is not None else config.test_fraction
    train_idx, test_idx = split_indices(labels, fraction, seed=config.seed)
    out = _out_dir(args, config)
    write_records_csv([records[i] for i in train_idx], out / "train.csv")
    write_records_csv([records[i] for i in test_idx], out / "test.csv")
    print(
        f"split {len(records)} records into {len(train_idx)} train / {len(test_idx)} test "
        f"-> {out / 'train.csv'}, {out / 'test.csv'}"
    )
    return 0


def cmd_train(args: argparse.Namespace, config: ExperimentConfig) -> int:
    records = load_records(args.input, args.input_format)
    rows = records_to_set(records, provenance=args.input)
    model = fit_model(args.model, rows, config, seed=derive_seed(config.seed, STAGE_IDS[args.model], 0))
    out = _out_dir(args, config) / f"model_{args.model}.json"
    out.write_text(json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"trained {args.model} on {len(rows)} rows -> {out}")
    if args.dump_tree is not None:
        if not isinstance(model, RandomForest):
            raise ConfigError("--dump-tree only applies to the rf model")
        _dump_tree(model, args.dump_tree)
    return 0


def cmd_evaluate(args: argparse.Namespace, config: ExperimentConfig) -> int:
    model = _load_model(args.model_file)
    records = load_records(args.input, args.input_format)
    rows = records_to_set(records, provenance=args.input)
    name = {MultinomialNB: "mnb", RandomForest: "rf", SvmClassifier: "svm"}[type(model)]
    result = metrics(confusion(model.predict(rows), rows.labels))
    report = EvalReport(mode="holdout", folds=None, per_model={name: result})
    _print_metrics(report, args.format)
    if args.out is not None:
        out = _out_dir(args, config) / "metrics.json"
        out.write_text(
            json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"wrote {out}")
    return 0


def cmd_cv(args: argparse.Namespace, config: ExperimentConfig) -> int:
    records = load_records(args.input, args.input_format)
    rows = records_to_set(records, provenance=args.input)
    k = args.folds if args.folds is not None else config.cv_folds
    if k < 2:
        raise ConfigError(f"cv needs at least 2 folds, got {k}")
    folds = kfold(rows, k, seed=derive_seed(config.seed, STAGE_IDS["folds"]))
    per_model = {}
    for name in config.models:
        per_fold = []
        for f, (fold_train, fold_val) in enumerate(folds):
            model = fit_model(
                name, fold_train, config, seed=derive_seed(config.seed, STAGE_IDS[name], 1 + f)
            )
            per_fold.append(metrics(confusion(model.predict(fold_val), fold_val.labels)))
        per_model[name] = mean_metrics(per_fold)
    report = EvalReport(mode="cv_mean", folds=k, per_model=per_model)
    _print_metrics(report, args.format)
    if args.out is not None:
        out = _out_dir(args, config) / "cv.json"
        out.write_text(
            json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"wrote {out}")
    return 0


def cmd_rank(args: argparse.Namespace, config: ExperimentConfig) -> int:
    model = _load_model(args.model_file)
    ranking = rank_features(model)
    if args.format == "json":
        print(json.dumps(ranking.to_json_dict(), indent=2, sort_keys=True))
    else:
        print(ranking.to_markdown())
    return 0


def cmd_run(args: argparse.Namespace, config: ExperimentConfig) -> int:
    if args.dump_tree is not None and "rf" not in config.models:
        raise ConfigError("--dump-tree needs the rf model in the run")
    captured: dict[str, RandomForest] = {}

    def observer(event: str, payload: dict) -> None:
        if event == "fit" and payload["model"] == "rf":
            captured["rf"] = payload["fitted"]

    report = run_experiment(config, observer=observer if args.dump_tree is not None else None)
    paths = write_report(report, _out_dir(args, config))
    for block_name, block in (("cv mean", report.cv_mean), ("holdout", report.holdout)):
        summary = ", ".join(
            f"{name} {m.accuracy:.3f}" for name, m in block.per_model.items()
        )
        print(f"accuracy ({block_name}): {summary}")
    for path in paths.values():
        print(f"wrote {path}")
    if args.dump_tree is not None:
        _dump_tree(captured["rf"], args.dump_tree)
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "balance": cmd_balance,
    "split": cmd_split,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "cv": cmd_cv,
    "rank": cmd_rank,
    "run": cmd_run,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _effective_config(args)
        return _COMMANDS[args.command](args, config)
    except PolicyCiteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
