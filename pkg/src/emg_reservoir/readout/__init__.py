from .cv import CLASSIFIERS, EvalReport, cross_validate, fit_predict
from .features import DEFAULT_WINDOW_MS, FeatureMatrix, build_feature_matrix, extract_rate_vectors
from .lda import LdaModel, predict_lda, train_lda
from .metrics import binary_auc, confusion_matrix, roc_auc, roc_curve
from .svm import SvmModel, predict_svm, rbf_kernel, smo_binary, train_svm

__all__ = [
    "CLASSIFIERS", "DEFAULT_WINDOW_MS", "EvalReport", "FeatureMatrix", "LdaModel", "SvmModel",
    "binary_auc", "build_feature_matrix", "confusion_matrix", "cross_validate", "extract_rate_vectors",
    "fit_predict", "predict_lda", "predict_svm", "rbf_kernel", "roc_auc", "roc_curve", "smo_binary",
    "train_lda", "train_svm",
]
