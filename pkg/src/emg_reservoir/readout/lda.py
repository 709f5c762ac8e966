"""Linear discriminant analysis with a shared, lightly regularized covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TrainingError

RIDGE = 1e-6


@dataclass(frozen=True, eq=False)
class LdaModel:
    classes: np.ndarray
    coef: np.ndarray       # (n_classes, n_features)
    intercept: np.ndarray  # (n_classes,)

    def decision_function(self, rows: np.ndarray) -> np.ndarray:
        return np.asarray(rows, dtype=np.float64) @ self.coef.T + self.intercept


def train_lda(rows: np.ndarray, labels: np.ndarray, ridge: float = RIDGE) -> LdaModel:
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels)
    classes = np.unique(y)
    if classes.size < 2:
        raise TrainingError("LDA needs at least two classes in the training data")
    n, d = X.shape
    means = np.stack([X[y == c].mean(axis=0) for c in classes])
    priors = np.array([np.mean(y == c) for c in classes])
    centered = X - means[np.searchsorted(classes, y)]
    dof = max(n - classes.size, 1)
    cov = centered.T @ centered / dof
    scale = np.mean(np.diag(cov))
    cov[np.diag_indices(d)] += ridge * scale if scale > 0 else ridge
    coef = np.linalg.solve(cov, means.T).T
    intercept = -0.5 * np.einsum("kd,kd->k", coef, means) + np.log(priors)
    return LdaModel(classes, coef, intercept)


def predict_lda(model: LdaModel, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Predicted labels and per-class log-discriminant scores."""
    scores = model.decision_function(rows)
    return model.classes[np.argmax(scores, axis=1)], scores
