"""Feature ranking extracted from fitted models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UnsupportedModelError
from .features import FEATURE_ORDER
from .forest import RandomForest
from .naive_bayes import MultinomialNB
from .svm import SvmClassifier


@dataclass(frozen=True)
class FeatureRanking:
    """Features ordered by descending weight; ties keep canonical order."""

    model: str
    entries: tuple[tuple[str, float], ...]

    def to_json_dict(self) -> dict:
        return {
            "model": self.model,
            "ranking": [{"feature": name, "weight": weight} for name, weight in self.entries],
        }

    def to_markdown(self) -> str:
        lines = ["| Rank | Feature | Weight |", "|---|---|---|"]
        for rank, (name, weight) in enumerate(self.entries, start=1):
            lines.append(f"| {rank} | {name} | {weight:.6f} |")
        return "\n".join(lines)


def rankings_to_markdown(rankings: Sequence[FeatureRanking]) -> str:
    """Combined table: feature rows (ordered by the first ranking), one
    weight column per model."""
    if not rankings:
        raise ValueError("need at least one ranking to format")
    weight_of = [dict(r.entries) for r in rankings]
    header = "| Feature | " + " | ".join(r.model for r in rankings) + " |"
    sep = "|---" * (len(rankings) + 1) + "|"
    lines = [header, sep]
    for name, _ in rankings[0].entries:
        cells = " | ".join(f"{w[name]:.6f}" for w in weight_of)
        lines.append(f"| {name} | {cells} |")
    return "\n".join(lines)


def _ranked(model: str, weights: np.ndarray) -> FeatureRanking:
    order = sorted(range(len(FEATURE_ORDER)), key=lambda f: (-weights[f], f))
    entries = tuple((FEATURE_ORDER[f], float(weights[f])) for f in order)
    return FeatureRanking(model=model, entries=entries)


def rank_features(model: MultinomialNB | RandomForest | SvmClassifier) -> FeatureRanking:
    """Rank features by a model's own notion of weight.

    Naive Bayes uses the absolute log-ratio of the two class conditionals;
    the forest uses normalized Gini importance. The RBF-kernel SVM decides in
    an implicit transformed space, so no per-input-feature weight vector
    exists (only a linear kernel would give one) and asking for a ranking
    raises UnsupportedModelError.
    """
    if isinstance(model, MultinomialNB):
        return _ranked("mnb", model.feature_weights())
    if isinstance(model, RandomForest):
        return _ranked("rf", model.feature_importances())
    if isinstance(model, SvmClassifier):
        raise UnsupportedModelError(
            "feature ranking is not defined for the RBF-kernel SVM: its decision "
            "function lives in an implicit kernel space with no per-feature "
            "weights; only a linear kernel would expose them"
        )
    raise UnsupportedModelError(f"cannot rank features for {type(model).__name__}")
