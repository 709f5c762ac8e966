"""RBF-kernel SVM trained by SMO, one-vs-one for multiclass problems.

The binary solver follows the maximal-violating-pair scheme: pick the pair that
violates the KKT conditions most, solve the two-variable subproblem analytically,
stop when the violation gap falls below ``tol``.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ..errors import TrainingError

TAU = 1e-12


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * ||a - b||^2) for every row pair."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


class KernelRows:
    """Row access to the training kernel matrix with a bounded LRU cache."""

    def __init__(self, X: np.ndarray, gamma: float, cache_mb: float = 256.0):
        self.X = X
        self.gamma = gamma
        self.sq = (X * X).sum(1)
        n = X.shape[0]
        self.max_rows = max(2, int(cache_mb * 2**20 // (8 * max(n, 1))))
        self.full = rbf_kernel(X, X, gamma) if n <= self.max_rows else None
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        r = self._cache.get(i)
        if r is not None:
            self._cache.move_to_end(i)
            return r
        sq = self.sq + self.sq[i] - 2.0 * (self.X @ self.X[i])
        r = np.exp(-self.gamma * np.maximum(sq, 0.0))
        r[i] = 1.0
        self._cache[i] = r
        if len(self._cache) > self.max_rows:
            self._cache.popitem(last=False)
        return r

    def diag(self) -> np.ndarray:
        return np.ones(self.X.shape[0])


@dataclass
class BinarySvm:
    support: np.ndarray      # training-row indices with alpha > 0
    dual_coef: np.ndarray    # alpha_i * y_i for the support rows
    alpha: np.ndarray        # full alpha vector, kept for diagnostics
    bias: float
    max_violation: float
    iterations: int
    objective: list[float] = field(default_factory=list)


def smo_binary(K: KernelRows, y: np.ndarray, C: float = 1.0, tol: float = 1e-3,
               max_iter: int = 1_000_000, track_objective: bool = False) -> BinarySvm:
    """Solve the soft-margin dual for labels ``y`` in {-1, +1}."""
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a'Qa - e'a
    objective = []
    violation = np.inf
    it = 0
    pos = y > 0
    for it in range(1, max_iter + 1):
        r = -y * grad
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        if not up.any() or not low.any():
            violation = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(r[up])])
        j = int(np.flatnonzero(low)[np.argmin(r[low])])
        violation = r[i] - r[j]
        if violation <= tol:
            break
        Ki, Kj = K.row(i), K.row(j)
        yi, yj = y[i], y[j]
        a = max(Ki[i] + Kj[j] - 2.0 * Ki[j], TAU)
        # step along direction (+yi on i, -yj on j) keeping y'alpha fixed
        lam = violation / a
        lam = min(lam, C - alpha[i] if yi > 0 else alpha[i])
        lam = min(lam, alpha[j] if yj > 0 else C - alpha[j])
        di, dj = yi * lam, -yj * lam
        alpha[i] += di
        alpha[j] += dj
        # snap to the box to absorb rounding
        alpha[i] = min(max(alpha[i], 0.0), C)
        alpha[j] = min(max(alpha[j], 0.0), C)
        grad += y * (yi * di * Ki + yj * dj * Kj)
        if track_objective:
            objective.append(float(alpha.sum() - 0.5 * alpha @ (grad + 1.0)))
    r = -y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(r[free].mean())
    else:
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        m = r[up].max() if up.any() else 0.0
        M = r[low].min() if low.any() else 0.0
        bias = float(0.5 * (m + M))
    support = np.flatnonzero(alpha > 0)
    return BinarySvm(support, alpha[support] * y[support], alpha, bias,
                     float(max(violation, 0.0)), it, objective)


@dataclass
class SvmModel:
    classes: np.ndarray
    gamma: float
    C: float
    pairs: list[tuple[int, int]]
    machines: list[BinarySvm]
    support_rows: list[np.ndarray]

    def pair_decisions(self, rows: np.ndarray) -> np.ndarray:
        """Signed decision value per (row, class pair); positive favours the first class."""
        X = np.asarray(rows, dtype=np.float64)
        out = np.zeros((X.shape[0], len(self.pairs)))
        for p, (m, sv) in enumerate(zip(self.machines, self.support_rows)):
            if sv.shape[0]:
                out[:, p] = rbf_kernel(X, sv, self.gamma) @ m.dual_coef
            out[:, p] += m.bias
        return out

    @property
    def max_violation(self) -> float:
        return max(m.max_violation for m in self.machines)


def train_svm(rows: np.ndarray, labels: np.ndarray, C: float = 1.0, gamma: float | None = None,
              tol: float = 1e-3, cache_mb: float = 256.0, track_objective: bool = False) -> SvmModel:
    """One-vs-one RBF SVM; ``gamma`` defaults to 1 / n_features."""
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or not np.all(np.isfinite(X)):
        raise ValueError("features must be a finite 2-D array")
    classes = np.unique(y)
    if classes.size < 2:
        raise TrainingError("SVM needs at least two classes in the training data")
    if gamma is None:
        gamma = 1.0 / X.shape[1]
    pairs, machines, svs = [], [], []
    for a, b in combinations(range(classes.size), 2):
        sel = (y == classes[a]) | (y == classes[b])
        Xs = X[sel]
        ys = np.where(y[sel] == classes[a], 1.0, -1.0)
        m = smo_binary(KernelRows(Xs, gamma, cache_mb), ys, C, tol, track_objective=track_objective)
        pairs.append((a, b))
        machines.append(m)
        svs.append(Xs[m.support])
    return SvmModel(classes, gamma, C, pairs, machines, svs)


def predict_svm(model: SvmModel, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Labels by one-vs-one vote (ties to the lowest class) and per-class scores.

    A class score is the sum of decision values of its pairwise machines, signed so
    that larger means more of that class.
    """
    X = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    dec = model.pair_decisions(X)
    k = model.classes.size
    votes = np.zeros((X.shape[0], k), dtype=np.int64)
    scores = np.zeros((X.shape[0], k))
    for p, (a, b) in enumerate(model.pairs):
        win_a = dec[:, p] > 0
        votes[win_a, a] += 1
        votes[~win_a, b] += 1
        scores[:, a] += dec[:, p]
        scores[:, b] -= dec[:, p]
    return model.classes[np.argmax(votes, axis=1)], scores
