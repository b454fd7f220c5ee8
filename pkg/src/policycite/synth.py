"""Synthetic mention-count data with a negative binomial + zero inflation model."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .features import FEATURE_ORDER, N_FEATURES, RecordSet

_CLASS_KEYS = ("negative", "positive")
_TOP_KEYS = frozenset({"rows", "positive_fraction", "seed", *_CLASS_KEYS})


@dataclass(frozen=True)
class FeatureParams:
    """Count distribution for one feature in one class.

    mean is the expected count; dispersion d controls overdispersion
    (variance = mean + d * mean^2, d = 0 degenerates to Poisson);
    zero_inflation is the probability of forcing the count to zero.
    """

    mean: float
    dispersion: float
    zero_inflation: float

    def validate(self, where: str) -> None:
        if not (np.isfinite(self.mean) and self.mean >= 0):
            raise ConfigError(f"{where}: mean must be finite and >= 0, got {self.mean}")
        if not (np.isfinite(self.dispersion) and self.dispersion >= 0):
            raise ConfigError(
                f"{where}: dispersion must be finite and >= 0, got {self.dispersion}"
            )
        if not 0.0 <= self.zero_inflation < 1.0:
            raise ConfigError(
                f"{where}: zero_inflation must be in [0, 1), got {self.zero_inflation}"
            )


@dataclass(frozen=True)
class GenSpec:
    """A complete generation recipe: per-class, per-feature count parameters
    (aligned to the feature order), the positive-class prior, row count and
    seed."""

    rows: int
    positive_fraction: float
    seed: int
    negative: tuple[FeatureParams, ...]
    positive: tuple[FeatureParams, ...]

    def __post_init__(self) -> None:
        if self.rows < 2:
            raise ConfigError(f"generation spec needs rows >= 2, got {self.rows}")
        if not 0.0 < self.positive_fraction < 1.0:
            raise ConfigError(
                f"positive_fraction must be in (0, 1), got {self.positive_fraction}"
            )
        for key, params in (("negative", self.negative), ("positive", self.positive)):
            if len(params) != N_FEATURES:
                raise ConfigError(
                    f"generation spec class {key!r} must define {N_FEATURES} features"
                )
            for name, p in zip(FEATURE_ORDER, params):
                p.validate(f"{key}.{name}")

    def with_overrides(self, rows: int | None = None, seed: int | None = None) -> GenSpec:
        out = self
        if rows is not None:
            out = replace(out, rows=rows)
        if seed is not None:
            out = replace(out, seed=seed)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> GenSpec:
        if not isinstance(data, dict):
            raise ConfigError("generation spec must be a JSON object")
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"generation spec has unknown keys: {sorted(unknown)}")
        missing = _TOP_KEYS - set(data)
        if missing:
            raise ConfigError(f"generation spec is missing keys: {sorted(missing)}")
        per_class = []
        for key in _CLASS_KEYS:
            block = data[key]
            if not isinstance(block, dict):
                raise ConfigError(f"generation spec class {key!r} must be an object")
            unknown = set(block) - set(FEATURE_ORDER)
            if unknown:
                raise ConfigError(f"{key}: unknown features: {sorted(unknown)}")
            missing = set(FEATURE_ORDER) - set(block)
            if missing:
                raise ConfigError(f"{key}: missing features: {sorted(missing)}")
            params = []
            for name in FEATURE_ORDER:
                entry = block[name]
                if not isinstance(entry, dict) or set(entry) != {
                    "mean",
                    "dispersion",
                    "zero_inflation",
                }:
                    raise ConfigError(
                        f"{key}.{name}: expected exactly the keys "
                        "mean, dispersion, zero_inflation"
                    )
                params.append(
                    FeatureParams(
                        mean=float(entry["mean"]),
                        dispersion=float(entry["dispersion"]),
                        zero_inflation=float(entry["zero_inflation"]),
                    )
                )
            per_class.append(tuple(params))
        return cls(
            rows=int(data["rows"]),
            positive_fraction=float(data["positive_fraction"]),
            seed=int(data["seed"]),
            negative=per_class[0],
            positive=per_class[1],
        )

    def to_dict(self) -> dict:
        out: dict = {
            "rows": self.rows,
            "positive_fraction": self.positive_fraction,
            "seed": self.seed,
        }
        for key, params in (("negative", self.negative), ("positive", self.positive)):
            out[key] = {
                name: {
                    "mean": p.mean,
                    "dispersion": p.dispersion,
                    "zero_inflation": p.zero_inflation,
                }
                for name, p in zip(FEATURE_ORDER, params)
            }
        return out


def load_genspec(path: str | Path) -> GenSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"generation spec not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return GenSpec.from_dict(data)


def default_genspec() -> GenSpec:
    """The calibrated generation spec shipped with the package."""
    from importlib.resources import files

    text = files("policycite").joinpath("specs/calibration.json").read_text(encoding="utf-8")
    return GenSpec.from_dict(json.loads(text))


def _draw_count(rng: np.random.Generator, p: FeatureParams) -> int:
    if rng.random() < p.zero_inflation:
        return 0
    if p.dispersion == 0.0:
        return int(rng.poisson(p.mean))
    r = 1.0 / p.dispersion
    return int(rng.negative_binomial(r, r / (r + p.mean)))


def generate(spec: GenSpec) -> RecordSet:
    """Draw labeled mention-count rows.

    Every row uses its own generator spawned from (seed, row index), so the
    first m rows of a longer run with the same seed are identical to the
    m-row run.
    """
    values = np.zeros((spec.rows, N_FEATURES), dtype=np.int64)
    labels = np.zeros(spec.rows, dtype=bool)
    for i in range(spec.rows):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed, spawn_key=(i,)))
        is_pos = rng.random() < spec.positive_fraction
        labels[i] = is_pos
        params = spec.positive if is_pos else spec.negative
        for f in range(N_FEATURES):
            values[i, f] = _draw_count(rng, params[f])
    return RecordSet(
        values,
        labels,
        provenance=f"synth(seed={spec.seed},rows={spec.rows},pos={spec.positive_fraction})",
    )
