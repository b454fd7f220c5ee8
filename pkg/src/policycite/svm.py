"""RBF-kernel support vector machine trained with a simplified SMO loop."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, FitError
from .features import N_FEATURES, RecordSet

# Below this change in alpha_j an update is treated as a no-op.
_MIN_ALPHA_STEP = 1e-5

# Rounding dust within this distance of a box bound collapses onto it, so
# non-support rows carry an exact zero and alphas never leave [0, C].
_SNAP_EPS = 1e-12


def _snap_to_box(a: float, c: float) -> float:
    eps = _SNAP_EPS * max(1.0, c)
    if a < eps:
        return 0.0
    if a > c - eps:
        return c
    return a


@dataclass(frozen=True)
class Standardizer:
    """Per-feature zero-mean unit-variance scaling (population variance).

    Constant features get scale 1.0 so transforming never divides by zero.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, values: np.ndarray) -> Standardizer:
        x = np.asarray(values, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError(f"expected a non-empty 2-d matrix, got shape {x.shape}")
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        scale = np.where(scale == 0.0, 1.0, scale)
        mean.setflags(write=False)
        scale.setflags(write=False)
        return cls(mean=mean, scale=scale)

    def transform(self, values: np.ndarray) -> np.ndarray:
        x = np.asarray(values, dtype=np.float64)
        return (x - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> Standardizer:
        mean = np.asarray(data["mean"], dtype=np.float64)
        scale = np.asarray(data["scale"], dtype=np.float64)
        mean.setflags(write=False)
        scale.setflags(write=False)
        return cls(mean=mean, scale=scale)


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * ||a - b||^2) between the rows of two matrices."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    sq_a = np.square(a).sum(axis=1)
    sq_b = np.square(b).sum(axis=1)
    d = sq_a[:, None] + sq_b[None, :] - 2.0 * (a @ b.T)
    np.maximum(d, 0.0, out=d)
    return np.exp(-gamma * d)


def _resolve_gamma(gamma: float | str, x_std: np.ndarray) -> float:
    if gamma == "scale":
        var = float(x_std.var())
        if var <= 0.0:
            raise FitError("cannot derive gamma from a constant feature matrix")
        return 1.0 / (N_FEATURES * var)
    value = float(gamma)
    if value <= 0.0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    return value


class _ColumnCache:
    """Bounded FIFO cache of RBF kernel columns against the training matrix."""

    def __init__(self, x: np.ndarray, sq: np.ndarray, gamma: float, budget_bytes: int) -> None:
        self._x = x
        self._sq = sq
        self._gamma = gamma
        self._cap = max(64, budget_bytes // (8 * x.shape[0]))
        self._cols: OrderedDict[int, np.ndarray] = OrderedDict()

    def column(self, i: int) -> np.ndarray:
        col = self._cols.get(i)
        if col is None:
            d = self._sq + self._sq[i] - 2.0 * (self._x @ self._x[i])
            np.maximum(d, 0.0, out=d)
            col = np.exp(-self._gamma * d)
            if len(self._cols) >= self._cap:
                self._cols.popitem(last=False)
            self._cols[i] = col
        return col


class SvmClassifier:
    """Soft-margin RBF SVM fitted by sequential minimal optimization.

    Each sweep visits the rows violating the KKT conditions (re-checked
    against the live error cache at visit time), pairs each with one
    uniformly drawn partner row, and solves the two-variable subproblem
    analytically. Training stops when ten consecutive sweeps change nothing,
    when no violators remain, or at the safety cap of 10 * n sweeps.
    """

    def __init__(
        self,
        support: np.ndarray,
        dual_coef: np.ndarray,
        b: float,
        gamma: float,
        c: float,
        tol: float,
        standardizer: Standardizer,
    ) -> None:
        self.support = support
        self.dual_coef = dual_coef  # alpha_k * y_k per support vector
        self.b = b
        self.gamma = gamma
        self.c = c
        self.tol = tol
        self.standardizer = standardizer
        self.n_sweeps: int | None = None
        self.n_updates: int | None = None
        support.setflags(write=False)
        dual_coef.setflags(write=False)

    @classmethod
    def fit(
        cls,
        train: RecordSet,
        c: float = 1.0,
        gamma: float | str = "scale",
        tol: float = 1e-3,
        max_passes: int = 10,
        seed: int = 0,
        sweep_callback: Callable[[int, np.ndarray, float], None] | None = None,
    ) -> SvmClassifier:
        if c <= 0:
            raise ConfigError(f"penalty c must be positive, got {c}")
        if tol <= 0:
            raise ConfigError(f"tolerance must be positive, got {tol}")
        if max_passes < 1:
            raise ConfigError(f"max_passes must be at least 1, got {max_passes}")
        neg, pos = train.class_counts()
        if neg == 0 or pos == 0:
            raise FitError(f"training data must contain both classes, got ({neg}, {pos})")
        n = len(train)
        standardizer = Standardizer.fit(train.values)
        x = standardizer.transform(train.values)
        g = _resolve_gamma(gamma, x)
        y = np.where(train.labels, 1.0, -1.0)

        sq = np.square(x).sum(axis=1)
        cache = _ColumnCache(x, sq, g, budget_bytes=300_000_000)
        rng = np.random.default_rng(seed)
        alpha = np.zeros(n, dtype=np.float64)
        b = 0.0
        errors = -y.copy()  # decision value minus target, initially f = 0
        sweep_cap = 10 * n
        clean_sweeps = 0
        sweeps = 0
        updates = 0
        while clean_sweeps < max_passes and sweeps < sweep_cap:
            sweeps += 1
            ey = errors * y
            violators = np.flatnonzero(
                ((ey < -tol) & (alpha < c)) | ((ey > tol) & (alpha > 0.0))
            )
            if violators.size == 0:
                break
            changed = 0
            for i in violators:
                e_i = errors[i]
                r = e_i * y[i]
                if not ((r < -tol and alpha[i] < c) or (r > tol and alpha[i] > 0.0)):
                    continue
                j = int(rng.integers(n - 1))
                if j >= i:
                    j += 1
                a_i, a_j = alpha[i], alpha[j]
                if y[i] != y[j]:
                    low, high = max(0.0, a_j - a_i), min(c, c + a_j - a_i)
                else:
                    low, high = max(0.0, a_i + a_j - c), min(c, a_i + a_j)
                if low == high:
                    continue
                k_ij = float(np.exp(-g * max(0.0, sq[i] + sq[j] - 2.0 * (x[i] @ x[j]))))
                eta = 2.0 * k_ij - 2.0  # k_ii = k_jj = 1 for the RBF kernel
                if eta >= 0.0:
                    continue
                e_j = errors[j]
                a_j_new = float(np.clip(a_j - y[j] * (e_i - e_j) / eta, low, high))
                if abs(a_j_new - a_j) < _MIN_ALPHA_STEP:
                    continue
                a_j_new = _snap_to_box(a_j_new, c)
                a_i_new = _snap_to_box(a_i + y[i] * y[j] * (a_j - a_j_new), c)
                d_i = y[i] * (a_i_new - a_i)
                d_j = y[j] * (a_j_new - a_j)
                b1 = b - e_i - d_i - d_j * k_ij
                b2 = b - e_j - d_i * k_ij - d_j
                if 0.0 < a_i_new < c:
                    b_new = b1
                elif 0.0 < a_j_new < c:
                    b_new = b2
                else:
                    b_new = (b1 + b2) / 2.0
                errors += d_i * cache.column(int(i)) + d_j * cache.column(j) + (b_new - b)
                alpha[i], alpha[j] = a_i_new, a_j_new
                b = b_new
                changed += 1
            updates += changed
            clean_sweeps = clean_sweeps + 1 if changed == 0 else 0
            if sweep_callback is not None:
                sweep_callback(sweeps, alpha.copy(), b)

        sv = np.flatnonzero(alpha > 0.0)
        model = cls(
            support=x[sv].copy(),
            dual_coef=(alpha[sv] * y[sv]),
            b=float(b),
            gamma=g,
            c=c,
            tol=tol,
            standardizer=standardizer,
        )
        model.n_sweeps = sweeps
        model.n_updates = updates
        return model

    @property
    def n_support(self) -> int:
        return int(self.support.shape[0])

    def decision_values(self, values: np.ndarray) -> np.ndarray:
        """Signed distance proxy f(x) for raw count rows."""
        x = self.standardizer.transform(np.atleast_2d(values))
        out = np.empty(x.shape[0], dtype=np.float64)
        if self.n_support == 0:
            out[:] = self.b
            return out
        step = max(1, 2_000_000 // max(1, self.n_support))
        for start in range(0, x.shape[0], step):
            block = x[start : start + step]
            k = rbf_kernel(block, self.support, self.gamma)
            out[start : start + block.shape[0]] = k @ self.dual_coef + self.b
        return out

    def predict(self, rows: RecordSet) -> np.ndarray:
        return self.decision_values(rows.values) > 0.0  # f = 0 falls to negative

    def to_dict(self) -> dict:
        return {
            "model": "svm",
            "C": self.c,
            "gamma": self.gamma,
            "b": self.b,
            "support_vectors": self.support.tolist(),
            "dual_coefs": self.dual_coef.tolist(),
            "standardizer": self.standardizer.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> SvmClassifier:
        support = np.asarray(data["support_vectors"], dtype=np.float64)
        dual_coef = np.asarray(data["dual_coefs"], dtype=np.float64)
        if support.size == 0:
            support = support.reshape(0, N_FEATURES)
        if support.ndim != 2 or support.shape[1] != N_FEATURES:
            raise ValueError("malformed serialized SVM support vectors")
        return cls(
            support=support,
            dual_coef=dual_coef,
            b=float(data["b"]),
            gamma=float(data["gamma"]),
            c=float(data["C"]),
            tol=1e-3,
            standardizer=Standardizer.from_dict(data["standardizer"]),
        )
