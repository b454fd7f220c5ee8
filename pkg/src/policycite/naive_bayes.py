"""Multinomial naive Bayes over raw mention counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitError
from .features import FEATURE_ORDER, N_FEATURES, RecordSet


@dataclass(frozen=True)
class MultinomialNB:
    """Count-based naive Bayes with Lidstone smoothing.

    Rows are treated as bags of mentions: a row's per-class score is the
    class log prior plus the count-weighted sum of per-feature log
    conditionals. The multinomial normalization term is identical across
    classes and is omitted.
    """

    alpha: float
    log_priors: np.ndarray  # shape (2,), order (negative, positive)
    log_cond: np.ndarray  # shape (2, 11)

    @classmethod
    def fit(cls, train: RecordSet, alpha: float = 1.0) -> MultinomialNB:
        if alpha <= 0:
            raise FitError(f"smoothing alpha must be positive, got {alpha}")
        neg, pos = train.class_counts()
        if neg == 0 or pos == 0:
            raise FitError(f"training data must contain both classes, got ({neg}, {pos})")
        y = train.labels
        counts = np.stack(
            [
                train.values[~y].sum(axis=0),
                train.values[y].sum(axis=0),
            ]
        ).astype(np.float64)
        totals = counts.sum(axis=1, keepdims=True)
        log_cond = np.log(counts + alpha) - np.log(totals + alpha * N_FEATURES)
        log_priors = np.log(np.array([neg, pos], dtype=np.float64) / len(train))
        log_cond.setflags(write=False)
        log_priors.setflags(write=False)
        return cls(alpha=alpha, log_priors=log_priors, log_cond=log_cond)

    def log_scores(self, x: np.ndarray) -> np.ndarray:
        """Unnormalized per-class log posteriors for one feature vector."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (N_FEATURES,):
            raise ValueError(f"expected a vector of {N_FEATURES} counts, got shape {x.shape}")
        return self.log_priors + self.log_cond @ x

    def predict_row(self, x: np.ndarray) -> bool:
        neg, pos = self.log_scores(x)
        return bool(pos > neg)  # tie goes to the negative class

    def predict(self, rows: RecordSet) -> np.ndarray:
        scores = rows.values.astype(np.float64) @ self.log_cond.T + self.log_priors
        return scores[:, 1] > scores[:, 0]

    def feature_weight(self, feature: int) -> float:
        """Absolute log-ratio of the positive and negative conditionals."""
        if not 0 <= feature < N_FEATURES:
            raise ValueError(f"feature index out of range: {feature}")
        return float(abs(self.log_cond[1, feature] - self.log_cond[0, feature]))

    def feature_weights(self) -> np.ndarray:
        return np.abs(self.log_cond[1] - self.log_cond[0])

    def to_dict(self) -> dict:
        return {
            "model": "mnb",
            "alpha": self.alpha,
            "feature_order": list(FEATURE_ORDER),
            "log_priors": self.log_priors.tolist(),
            "log_cond": self.log_cond.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> MultinomialNB:
        prior = np.asarray(data["log_priors"], dtype=np.float64)
        cond = np.asarray(data["log_cond"], dtype=np.float64)
        if prior.shape != (2,) or cond.shape != (2, N_FEATURES):
            raise ValueError("malformed serialized naive Bayes model")
        prior.setflags(write=False)
        cond.setflags(write=False)
        return cls(alpha=float(data["alpha"]), log_priors=prior, log_cond=cond)
