"""End-to-end experiment pipeline: data, protocol, models, report."""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, PolicyCiteError
from .evaluation import (
    EvalReport,
    Metrics,
    confusion,
    kfold,
    mean_metrics,
    metrics,
    split_train_test,
)
from .features import N_FEATURES, RecordSet, balance, load_records, records_to_set
from .forest import RandomForest, _resolve_max_features
from .naive_bayes import MultinomialNB
from .ranking import FeatureRanking, rank_features, rankings_to_markdown
from .svm import SvmClassifier
from .synth import default_genspec, load_genspec

MODEL_ORDER = ("mnb", "rf", "svm")

# Marker accepted wherever a generation-spec path is expected: use the
# calibrated spec shipped inside the package.
BUILTIN_GENSPEC = "builtin:calibration"

SVM_RANKING_NOTE = (
    "No feature ranking is reported for the SVM: with an RBF kernel the "
    "decision function lives in an implicit transformed space and has no "
    "per-feature weight vector (only a linear kernel would provide one)."
)

# Fixed stage identifiers for deriving per-stage seeds from the experiment
# seed. Values are part of the reproducibility contract: changing them
# changes every derived stream.
STAGE_IDS = {"balance": 1, "split": 2, "folds": 3, "mnb": 4, "rf": 5, "svm": 6}


def derive_seed(base: int, *key: int) -> int:
    """Deterministic child seed for one pipeline stage."""
    ss = np.random.SeedSequence(entropy=base, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _check_keys(block: dict, allowed: set[str], where: str) -> None:
    unknown = set(block) - allowed
    _require(not unknown, f"{where}: unknown keys {sorted(unknown)}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment parameters with explicit defaults.

    ``input_path``/``input_format`` name a raw record file; ``genspec`` names
    a generation-spec JSON file (or the builtin marker). Exactly one input
    style is set.
    """

    input_path: str | None = None
    input_format: str | None = None
    genspec: str | None = BUILTIN_GENSPEC
    seed: int = 0
    balance: bool = False
    test_fraction: float = 0.2
    cv_folds: int = 10
    mnb_alpha: float = 1.0
    rf_n_trees: int = 100
    rf_max_features: int | str = "sqrt"
    svm_c: float = 1.0
    svm_gamma: float | str = "scale"
    svm_tol: float = 1e-3
    svm_max_passes: int = 10
    models: tuple[str, ...] = MODEL_ORDER
    output_dir: str = "out"

    def __post_init__(self) -> None:
        has_file = self.input_path is not None
        _require(
            has_file != (self.genspec is not None),
            "input: exactly one of a record file and a generation spec must be set",
        )
        if has_file:
            _require(
                self.input_format in ("csv", "jsonl"),
                f"input.format must be 'csv' or 'jsonl', got {self.input_format!r}",
            )
        else:
            _require(self.input_format is None, "input.format only applies to record files")
        _require(0 <= self.seed < 2**64, f"seed must be an unsigned 64-bit value, got {self.seed}")
        _require(
            0.0 < self.test_fraction < 1.0,
            f"test_fraction must be in (0, 1), got {self.test_fraction}",
        )
        _require(self.cv_folds >= 2, f"cv_folds must be at least 2, got {self.cv_folds}")
        _require(self.mnb_alpha > 0, f"mnb.alpha must be positive, got {self.mnb_alpha}")
        _require(self.rf_n_trees >= 1, f"rf.n_trees must be at least 1, got {self.rf_n_trees}")
        try:
            _resolve_max_features(self.rf_max_features)
        except PolicyCiteError:
            raise ConfigError(
                f'rf.max_features must be "sqrt", "all" or an int in [1, {N_FEATURES}], '
                f"got {self.rf_max_features!r}"
            ) from None
        _require(self.svm_c > 0, f"svm.c must be positive, got {self.svm_c}")
        if self.svm_gamma != "scale":
            _require(
                isinstance(self.svm_gamma, (int, float)) and self.svm_gamma > 0,
                f'svm.gamma must be "scale" or a positive number, got {self.svm_gamma!r}',
            )
        _require(self.svm_tol > 0, f"svm.tol must be positive, got {self.svm_tol}")
        _require(
            self.svm_max_passes >= 1,
            f"svm.max_passes must be at least 1, got {self.svm_max_passes}",
        )
        _require(bool(self.models), "models must name at least one model")
        unknown = [m for m in self.models if m not in MODEL_ORDER]
        _require(not unknown, f"unknown models {unknown}; choose from {list(MODEL_ORDER)}")
        _require(
            len(set(self.models)) == len(self.models), f"duplicate models in {list(self.models)}"
        )

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        _check_keys(
            data,
            {
                "input",
                "seed",
                "balance",
                "test_fraction",
                "cv_folds",
                "mnb",
                "rf",
                "svm",
                "models",
                "output_dir",
            },
            "config",
        )
        kwargs: dict = {}
        if "input" in data:
            block = data["input"]
            _require(isinstance(block, dict), "input must be an object")
            _check_keys(block, {"path", "format", "genspec"}, "input")
            kwargs["input_path"] = block.get("path")
            kwargs["input_format"] = block.get("format")
            kwargs["genspec"] = block.get("genspec")
        for key, caster in (("seed", int), ("cv_folds", int)):
            if key in data:
                kwargs[key] = caster(data[key])
        if "balance" in data:
            _require(isinstance(data["balance"], bool), "balance must be true or false")
            kwargs["balance"] = data["balance"]
        if "test_fraction" in data:
            kwargs["test_fraction"] = float(data["test_fraction"])
        if "mnb" in data:
            _check_keys(data["mnb"], {"alpha"}, "mnb")
            if "alpha" in data["mnb"]:
                kwargs["mnb_alpha"] = float(data["mnb"]["alpha"])
        if "rf" in data:
            _check_keys(data["rf"], {"n_trees", "max_features"}, "rf")
            if "n_trees" in data["rf"]:
                kwargs["rf_n_trees"] = int(data["rf"]["n_trees"])
            if "max_features" in data["rf"]:
                kwargs["rf_max_features"] = data["rf"]["max_features"]
        if "svm" in data:
            _check_keys(data["svm"], {"c", "gamma", "tol", "max_passes"}, "svm")
            if "c" in data["svm"]:
                kwargs["svm_c"] = float(data["svm"]["c"])
            if "gamma" in data["svm"]:
                g = data["svm"]["gamma"]
                kwargs["svm_gamma"] = g if g == "scale" else float(g)
            if "tol" in data["svm"]:
                kwargs["svm_tol"] = float(data["svm"]["tol"])
            if "max_passes" in data["svm"]:
                kwargs["svm_max_passes"] = int(data["svm"]["max_passes"])
        if "models" in data:
            _require(
                isinstance(data["models"], list) and all(isinstance(m, str) for m in data["models"]),
                "models must be a list of names",
            )
            # Canonical order regardless of how the list was written.
            given = data["models"]
            _require(len(set(given)) == len(given), f"duplicate models in {given}")
            unknown = [m for m in given if m not in MODEL_ORDER]
            _require(not unknown, f"unknown models {unknown}; choose from {list(MODEL_ORDER)}")
            kwargs["models"] = tuple(m for m in MODEL_ORDER if m in given)
        if "output_dir" in data:
            kwargs["output_dir"] = str(data["output_dir"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def echo_dict(self) -> dict:
        """Canonical config echo for the report.

        The output directory is environmental (where the report lands, not
        what it says) and is deliberately not part of the echo, keeping
        reports byte-comparable across working directories.
        """
        if self.input_path is not None:
            input_block: dict = {"path": self.input_path, "format": self.input_format}
        else:
            input_block = {"genspec": self.genspec}
        return {
            "input": input_block,
            "seed": self.seed,
            "balance": self.balance,
            "test_fraction": self.test_fraction,
            "cv_folds": self.cv_folds,
            "mnb": {"alpha": self.mnb_alpha},
            "rf": {"n_trees": self.rf_n_trees, "max_features": self.rf_max_features},
            "svm": {
                "c": self.svm_c,
                "gamma": self.svm_gamma,
                "tol": self.svm_tol,
                "max_passes": self.svm_max_passes,
            },
            "models": list(self.models),
        }


Observer = Callable[[str, dict], None]


@dataclass(frozen=True)
class Report:
    """Everything one experiment produced, minus wall-clock noise.

    ``timings`` is carried on the object but serialized to a separate
    sidecar, so the main report is byte-identical across equal runs.
    """

    config: dict
    seed: int
    dataset: dict
    split: dict
    cv_mean: EvalReport
    holdout: EvalReport
    rankings: tuple[FeatureRanking, ...]
    notes: tuple[str, ...]
    timings: tuple[tuple[str, float], ...]

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "dataset": self.dataset,
            "split": self.split,
            "results": {
                "cv_mean": self.cv_mean.to_json_dict(),
                "holdout": self.holdout.to_json_dict(),
            },
            "rankings": {r.model: r.to_json_dict()["ranking"] for r in self.rankings},
            "notes": list(self.notes),
        }

    def to_markdown(self) -> str:
        parts = [
            "# Policy citation prediction report",
            "",
            f"- input: `{json.dumps(self.config['input'], sort_keys=True)}`",
            f"- seed: {self.seed}",
            f"- rows: {self.dataset['rows']} "
            f"(negative {self.dataset['class_counts'][0]}, "
            f"positive {self.dataset['class_counts'][1]})",
            f"- split: {self.split['train_rows']} train / {self.split['test_rows']} test",
            "",
            f"## Metrics (mean over {self.cv_mean.folds} validation folds)",
            "",
            self.cv_mean.to_markdown(),
            "",
            "## Metrics (held-out test set)",
            "",
            self.holdout.to_markdown(),
        ]
        if self.rankings:
            parts += ["", "## Feature rankings", "", rankings_to_markdown(self.rankings)]
        if self.notes:
            parts += ["", "## Notes", ""]
            parts += [f"- {note}" for note in self.notes]
        parts.append("")
        return "\n".join(parts)

    def timings_dict(self) -> dict:
        return {
            "stages": [{"name": name, "seconds": secs} for name, secs in self.timings],
            "total_seconds": sum(secs for _, secs in self.timings),
        }


def fit_model(name: str, train: RecordSet, config: ExperimentConfig, seed: int):
    """Fit one model by name with the config's hyperparameters."""
    if name == "mnb":
        return MultinomialNB.fit(train, alpha=config.mnb_alpha)
    if name == "rf":
        return RandomForest.fit(
            train,
            n_trees=config.rf_n_trees,
            max_features=config.rf_max_features,
            seed=seed,
        )
    if name == "svm":
        return SvmClassifier.fit(
            train,
            c=config.svm_c,
            gamma=config.svm_gamma,
            tol=config.svm_tol,
            max_passes=config.svm_max_passes,
            seed=seed,
        )
    raise ConfigError(f"unknown model {name!r}")


@contextmanager
def _stage(name: str, timings: list[tuple[str, float]]):
    """Time a pipeline stage and prefix any toolkit error with its name."""
    start = time.perf_counter()
    try:
        yield
    except PolicyCiteError as exc:
        raise type(exc)(f"stage {name}: {exc}") from exc
    timings.append((name, time.perf_counter() - start))


def load_input(config: ExperimentConfig) -> RecordSet:
    """Resolve the configured input into a RecordSet."""
    if config.input_path is not None:
        records = load_records(config.input_path, config.input_format)
        return records_to_set(records, provenance=config.input_path)
    from .synth import generate

    if config.genspec == BUILTIN_GENSPEC:
        spec = default_genspec()
    else:
        spec = load_genspec(config.genspec)
    return generate(spec)


def run_experiment(config: ExperimentConfig, observer: Observer | None = None) -> Report:
    """Run the full pipeline and return the report (nothing written to disk).

    ``observer`` is a test instrumentation hook called as
    ``observer(event, payload)`` after each stage; payloads hold the live
    RecordSet objects so tests can assert protocol properties such as the
    held-out rows never reaching a fit.
    """

    def emit(event: str, payload: dict) -> None:
        if observer is not None:
            observer(event, payload)

    timings: list[tuple[str, float]] = []
    with _stage("load", timings):
        rows = load_input(config)
        input_rows = len(rows)
        input_counts = rows.class_counts()
        emit("load", {"rows": rows})

    if config.balance:
        with _stage("balance", timings):
            rows = balance(rows, seed=derive_seed(config.seed, STAGE_IDS["balance"]))
            emit("balance", {"rows": rows})

    with _stage("split", timings):
        train, test = split_train_test(
            rows, config.test_fraction, seed=derive_seed(config.seed, STAGE_IDS["split"])
        )
        emit("split", {"train": train, "test": test})

    with _stage("cv", timings):
        folds = kfold(train, config.cv_folds, seed=derive_seed(config.seed, STAGE_IDS["folds"]))

    cv_metrics: dict[str, Metrics] = {}
    holdout_metrics: dict[str, Metrics] = {}
    fitted: dict[str, MultinomialNB | RandomForest | SvmClassifier] = {}
    for name in config.models:
        stage_id = STAGE_IDS[name]
        with _stage(f"cv:{name}", timings):
            per_fold = []
            for f, (fold_train, fold_val) in enumerate(folds):
                model = fit_model(
                    name, fold_train, config, seed=derive_seed(config.seed, stage_id, 1 + f)
                )
                emit(
                    "cv_fold",
                    {"model": name, "fold": f, "train": fold_train, "validation": fold_val},
                )
                per_fold.append(metrics(confusion(model.predict(fold_val), fold_val.labels)))
            cv_metrics[name] = mean_metrics(per_fold)
        with _stage(f"fit:{name}", timings):
            fitted[name] = fit_model(name, train, config, seed=derive_seed(config.seed, stage_id, 0))
            emit("fit", {"model": name, "train": train, "fitted": fitted[name]})
        with _stage(f"evaluate:{name}", timings):
            predictions = fitted[name].predict(test)
            holdout_metrics[name] = metrics(confusion(predictions, test.labels))
            emit("holdout_eval", {"model": name, "test": test})

    rankings = []
    notes = []
    with _stage("rank", timings):
        for name in config.models:
            if name in ("mnb", "rf"):
                rankings.append(rank_features(fitted[name]))
        if "svm" in config.models:
            notes.append(SVM_RANKING_NOTE)

    return Report(
        config=config.echo_dict(),
        seed=config.seed,
        dataset={
            "provenance": rows.provenance,
            "input_rows": input_rows,
            "input_class_counts": list(input_counts),
            "rows": len(rows),
            "class_counts": list(rows.class_counts()),
            "balanced": config.balance,
        },
        split={
            "train_rows": len(train),
            "train_class_counts": list(train.class_counts()),
            "test_rows": len(test),
            "test_class_counts": list(test.class_counts()),
        },
        cv_mean=EvalReport(mode="cv_mean", folds=config.cv_folds, per_model=cv_metrics),
        holdout=EvalReport(mode="holdout", folds=None, per_model=holdout_metrics),
        rankings=tuple(rankings),
        notes=tuple(notes),
        timings=tuple(timings),
    )


def write_report(report: Report, out_dir: str | Path) -> dict[str, Path]:
    """Write report.json, report.md and timings.json; returns the paths.

    Files land only after the whole pipeline has succeeded; a failed run
    writes nothing.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report.json": out / "report.json",
        "report.md": out / "report.md",
        "timings.json": out / "timings.json",
    }
    paths["report.json"].write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    paths["report.md"].write_text(report.to_markdown(), encoding="utf-8")
    paths["timings.json"].write_text(
        json.dumps(report.timings_dict(), indent=2) + "\n", encoding="utf-8"
    )
    return paths
