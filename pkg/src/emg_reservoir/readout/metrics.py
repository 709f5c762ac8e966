"""Accuracy, confusion matrices and one-vs-rest ROC statistics."""

from __future__ import annotations

import warnings

import numpy as np


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=int), np.asarray(y_pred, dtype=int)), 1)
    return cm


def midranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(x.size)
    boundaries = np.flatnonzero(np.diff(xs)) + 1
    starts = np.concatenate(([0], boundaries))
    stops = np.concatenate((boundaries, [x.size]))
    for a, b in zip(starts, stops):
        ranks[order[a:b]] = 0.5 * (a + b - 1) + 1.0
    return ranks


def binary_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic."""
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    r = midranks(scores)
    return float((r[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Per-class one-vs-rest AUC, micro AUC and macro AUC.

    Classes without positives (or without negatives) get NaN and are left out of the
    macro mean with a warning.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    k = scores.shape[1]
    onehot = labels[:, None] == np.arange(k)[None, :]
    per_class = np.array([binary_auc(scores[:, c], onehot[:, c]) for c in range(k)])
    undefined = np.isnan(per_class)
    if undefined.any():
        warnings.warn(f"AUC undefined for classes {np.flatnonzero(undefined).tolist()}", RuntimeWarning)
    macro = float(per_class[~undefined].mean()) if (~undefined).any() else float("nan")
    micro = binary_auc(scores.ravel(), onehot.ravel())
    return per_class, micro, macro


def roc_curve(scores: np.ndarray, positive: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(fpr, tpr) points at every distinct threshold, from (0, 0) to (1, 1)."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    order = np.argsort(-scores, kind="mergesort")
    s, p = scores[order], positive[order]
    tps = np.cumsum(p)
    fps = np.cumsum(~p)
    last = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tpr = np.r_[0.0, tps[last] / max(p.sum(), 1)]
    fpr = np.r_[0.0, fps[last] / max((~p).sum(), 1)]
    return fpr, tpr
