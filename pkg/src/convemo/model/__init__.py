"""Model training, prediction and persistence."""

from .gbdt import (
    FeatureHistogram,
    GbdtModel,
    GbdtParams,
    SingleClassDataset,
    Split,
    Tree,
    TreeNode,
    find_best_split,
    softmax_grad_hess,
    train_gbdt,
)
from .gbdt import predict_proba as predict_proba_gbdt
from .gbdt import predict_proba_matrix as predict_proba_matrix_gbdt
from .logreg import LogRegModel, train_logreg
from .store import CorruptModel, UnsupportedVersion, load_model, save_model

from . import gbdt, logreg


def predict_proba(model, x):
    """Class probabilities of one feature vector, either model kind."""
    if isinstance(model, LogRegModel):
        return logreg.predict_proba(model, x)
    return gbdt.predict_proba(model, x)


def predict_proba_matrix(model, X):
    """Class probabilities for each row of a sparse matrix."""
    if isinstance(model, LogRegModel):
        return logreg.predict_proba_matrix(model, X)
    return gbdt.predict_proba_matrix(model, X)


__all__ = [
    "FeatureHistogram", "GbdtModel", "GbdtParams", "SingleClassDataset", "Split",
    "Tree", "TreeNode", "find_best_split", "softmax_grad_hess", "train_gbdt",
    "LogRegModel", "train_logreg", "CorruptModel", "UnsupportedVersion",
    "load_model", "save_model", "predict_proba", "predict_proba_matrix",
    "predict_proba_gbdt", "predict_proba_matrix_gbdt",
]
