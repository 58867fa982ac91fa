"""Multiclass logistic regression, the linear comparison model.

Trained by plain minibatch gradient descent on softmax cross-entropy
plus an L2 penalty (l2/2 * ||W||^2, bias unregularized).  Minibatch
order is a seeded shuffle per epoch, so training is deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..corpus import CLASS_ORDER
from ..errors import DimensionMismatch, EmptyDataset
from .gbdt import NUM_CLASSES, SingleClassDataset, _as_class_indices, _softmax_rows


@dataclass
class LogRegModel:
    weights: np.ndarray          # (4, dimension)
    bias: np.ndarray             # (4,)
    l2: float
    class_order: tuple[str, ...]
    epoch_losses: list[float] = field(default_factory=list, repr=False)

    @property
    def dimension(self) -> int:
        return self.weights.shape[1]


def _loss(X: sp.csr_matrix, onehot: np.ndarray, weights: np.ndarray,
          bias: np.ndarray, l2: float) -> float:
    logits = X @ weights.T + bias
    logp = logits - logits.max(axis=1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
    ce = -(onehot * logp).sum(axis=1).mean()
    return float(ce + 0.5 * l2 * np.square(weights).sum())


def train_logreg(rows: sp.spmatrix, labels, l2: float = 0.01, epochs: int = 30,
                 step: float = 0.2, seed: int = 0, batch_size: int = 64) -> LogRegModel:
    """Fit the 4-class linear model; records the loss after every epoch."""
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if step <= 0:
        raise ValueError("step must be positive")
    if l2 < 0:
        raise ValueError("l2 must be >= 0")
    X = rows.tocsr().astype(np.float64)
    n, dim = X.shape
    if n == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    y = _as_class_indices(labels, n)
    if len(np.unique(y)) < 2:
        raise SingleClassDataset("training data contains a single class")

    onehot = np.zeros((n, NUM_CLASSES))
    onehot[np.arange(n), y] = 1.0
    weights = np.zeros((NUM_CLASSES, dim))
    bias = np.zeros(NUM_CLASSES)
    rng = np.random.default_rng(seed)

    losses = [_loss(X, onehot, weights, bias, l2)]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            Xb = X[batch]
            logits = Xb @ weights.T + bias
            proba = _softmax_rows(logits)
            delta = (proba - onehot[batch]) / len(batch)
            grad_w = (Xb.T @ delta).T
            weights -= step * (grad_w + l2 * weights)
            bias -= step * delta.sum(axis=0)
        losses.append(_loss(X, onehot, weights, bias, l2))

    return LogRegModel(weights=weights, bias=bias, l2=l2,
                       class_order=tuple(label.value for label in CLASS_ORDER),
                       epoch_losses=losses)


def predict_proba_matrix(model: LogRegModel, X: sp.spmatrix) -> np.ndarray:
    X = X.tocsr().astype(np.float64)
    if X.shape[1] != model.dimension:
        raise DimensionMismatch(model.dimension, X.shape[1], "feature matrix")
    return _softmax_rows(X @ model.weights.T + model.bias)


def predict_proba(model: LogRegModel, x) -> np.ndarray:
    if x.dimension != model.dimension:
        raise DimensionMismatch(model.dimension, x.dimension, "feature vector")
    dense = np.zeros(model.dimension)
    dense[list(x.indices)] = x.values
    return _softmax_rows(model.weights @ dense + model.bias)
