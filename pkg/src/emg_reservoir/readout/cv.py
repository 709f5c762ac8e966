"""Session-wise cross-validation and the evaluation report."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dataio import FoldPlan, atomic_write_text
from ..errors import FoldError
from .features import FeatureMatrix
from .lda import predict_lda, train_lda
from .metrics import confusion_matrix, roc_auc, roc_curve
from .svm import predict_svm, train_svm

CLASSIFIERS = ("svm", "lda")


@dataclass
class EvalReport:
    fold_accuracy: list[float]
    mean_accuracy: float
    std_accuracy: float
    confusion: np.ndarray
    auc_per_class: list[float]
    auc_micro: float
    auc_macro: float
    classifier: str
    level: str = "window"
    predictions: list[dict] = field(default_factory=list, repr=False)
    scores: np.ndarray | None = field(default=None, repr=False)
    truth: np.ndarray | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)
    trial_fold_accuracy: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        def clean(x):
            return None if x is None or (isinstance(x, float) and np.isnan(x)) else x

        return {
            "classifier": self.classifier,
            "level": self.level,
            "fold_accuracy": [float(a) for a in self.fold_accuracy],
            "trial_fold_accuracy": [float(a) for a in self.trial_fold_accuracy],
            "mean_accuracy": float(self.mean_accuracy),
            "std_accuracy": float(self.std_accuracy),
            "confusion": self.confusion.tolist(),
            "auc_per_class": [clean(float(a)) for a in self.auc_per_class],
            "auc_micro": clean(float(self.auc_micro)),
            "auc_macro": clean(float(self.auc_macro)),
            **({"meta": self.meta} if self.meta else {}),
        }

    def write(self, out_dir: str | Path, stem: str = "report") -> list[Path]:
        """Write ``stem``.json, ``stem``_predictions.csv and ``stem``_roc.csv; returns the paths."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {f"{stem}.json": json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"}
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fold", "row", "trial", "session", "label", "predicted"])
        for p in self.predictions:
            w.writerow([p["fold"], p["row"], p["trial"], p["session"], p["label"], p["predicted"]])
        files[f"{stem}_predictions.csv"] = buf.getvalue()
        if self.scores is not None:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["curve", "fpr", "tpr"])
            k = self.scores.shape[1]
            onehot = self.truth[:, None] == np.arange(k)[None, :]
            curves = [(f"class{c}", self.scores[:, c], onehot[:, c]) for c in range(k)]
            curves.append(("micro", self.scores.ravel(), onehot.ravel()))
            for name, s, pos in curves:
                for f, t in zip(*roc_curve(s, pos)):
                    w.writerow([name, repr(float(f)), repr(float(t))])
            files[f"{stem}_roc.csv"] = buf.getvalue()
        for name, text in files.items():
            atomic_write_text(out / name, text)
        return [out / name for name in files]


def standardize(X_train: np.ndarray, X_test: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Z-score both sets with the training rows' statistics (constant columns pass through)."""
    mu = X_train.mean(axis=0)
    sd = X_train.std(axis=0)
    sd[sd == 0] = 1.0
    return (X_train - mu) / sd, (X_test - mu) / sd


def fit_predict(kind: str, X_train, y_train, X_test, n_classes: int, scale: bool = True, **svm_kw):
    """Train ``kind`` and return (labels, scores with one column per class index)."""
    if scale:
        X_train, X_test = standardize(np.asarray(X_train, dtype=np.float64),
                                      np.asarray(X_test, dtype=np.float64))
    if kind == "svm":
        model = train_svm(X_train, y_train, **svm_kw)
        pred, s = predict_svm(model, X_test)
    elif kind == "lda":
        model = train_lda(X_train, y_train)
        pred, s = predict_lda(model, X_test)
    else:
        raise ValueError(f"unknown classifier {kind!r}; choose from {CLASSIFIERS}")
    # classes absent from training never win and rank below every seen class
    scores = np.full((len(X_test), n_classes), np.min(s) - 1.0 if s.size else 0.0)
    scores[:, model.classes] = s
    return pred, scores


def _vote(pred: np.ndarray, trial: np.ndarray, n_classes: int):
    ids = np.unique(trial)
    out = np.empty(ids.size, dtype=np.int64)
    for n, t in enumerate(ids):
        out[n] = np.argmax(np.bincount(pred[trial == t], minlength=n_classes))
    return ids, out


def cross_validate(fm: FeatureMatrix, folds: FoldPlan, classifier_kind: str = "svm",
                   n_classes: int | None = None, majority_vote: bool = False, scale: bool = True,
                   **svm_kw) -> EvalReport:
    """Train on the training sessions and test on the held-out one, per fold.

    Accuracy is per window unless ``majority_vote`` aggregates each trial's windows.
    Features are z-scored with training statistics unless ``scale`` is False. The std
    is the population std over folds; the confusion matrix and AUCs pool all folds'
    test rows.
    """
    k = int(n_classes if n_classes is not None else fm.labels.max() + 1)
    present = set(np.unique(fm.session).tolist())
    splits = []
    for f, (train_s, test_s) in enumerate(folds):
        if test_s not in present or not set(train_s) <= present:
            raise FoldError(f"fold {f} refers to sessions missing from the features")
        splits.append((fm.subset(np.isin(fm.session, list(train_s))), fm.subset(fm.session == test_s)))
    return evaluate_splits(splits, classifier_kind, k, majority_vote, scale, **svm_kw)


def evaluate_splits(splits, classifier_kind: str, n_classes: int, majority_vote: bool = False,
                    scale: bool = True, **svm_kw) -> EvalReport:
    """Score a sequence of (train, test) FeatureMatrix pairs, one per fold."""
    k = n_classes
    accs, trial_accs, all_true, all_pred, all_scores, predictions = [], [], [], [], [], []
    for f, (train, test) in enumerate(splits):
        if len(test) == 0:
            raise FoldError(f"fold {f} has an empty test partition")
        if len(train) == 0:
            raise FoldError(f"fold {f} has an empty training partition")
        pred, scores = fit_predict(classifier_kind, train.rows, train.labels, test.rows, k, scale,
                                   **svm_kw)
        y = test.labels
        for r, p in enumerate(pred.tolist()):
            predictions.append({"fold": f, "row": r, "trial": int(test.trial[r]),
                                "session": int(test.session[r]), "label": int(y[r]),
                                "predicted": int(p)})
        ids, tpred = _vote(pred, test.trial, k)
        ty = np.array([y[test.trial == t][0] for t in ids])
        trial_accs.append(float(np.mean(tpred == ty)))
        if majority_vote:
            scores = np.stack([scores[test.trial == t].mean(axis=0) for t in ids])
            y, pred = ty, tpred
        accs.append(float(np.mean(pred == y)))
        all_true.append(y)
        all_pred.append(pred)
        all_scores.append(scores)
    y_true = np.concatenate(all_true)
    y_pred = np.concatenate(all_pred)
    scores = np.vstack(all_scores)
    per_class, micro, macro = roc_auc(scores, y_true)
    return EvalReport(
        fold_accuracy=accs,
        mean_accuracy=float(np.mean(accs)),
        std_accuracy=float(np.std(accs)),
        confusion=confusion_matrix(y_true, y_pred, k),
        auc_per_class=per_class.tolist(),
        auc_micro=micro,
        auc_macro=macro,
        classifier=classifier_kind,
        level="trial" if majority_vote else "window",
        predictions=predictions,
        scores=scores,
        truth=y_true,
        trial_fold_accuracy=trial_accs,
    )
