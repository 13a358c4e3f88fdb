"""Multinomial softmax regression by full-batch gradient descent.

Features are z-scored internally (stats stored on the model), a bias
column is appended, and weights start at zero, so the first-step gradient
has the closed form (mean predicted probability - class rate) per
feature. Descent stops when the max-abs gradient entry drops below tol.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyTrainingSetError
from ..nn.losses import softmax


@dataclass
class SoftmaxRegressionModel:
    weights: np.ndarray            # (K, D+1); last column multiplies the bias
    mean: np.ndarray               # (D,) training feature means
    std: np.ndarray                # (D,) training feature stds (0 -> 1)
    n_classes: int
    lr: float
    tol: float
    n_iter: int
    converged: bool
    loss_history: list = field(default_factory=list)
    kind: str = "softmax_regression"


def _design(x: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    z = (x - mean) / std
    return np.hstack([z, np.ones((x.shape[0], 1))])


def softmax_gradient(weights: np.ndarray, xb: np.ndarray, onehot: np.ndarray):
    """Mean cross-entropy loss and its gradient w.r.t. weights."""
    probs = softmax(xb @ weights.T)
    n = xb.shape[0]
    loss = float(-np.mean(np.log(probs[onehot.astype(bool)] + 1e-12)))
    grad = (probs - onehot).T @ xb / n
    return loss, grad


def fit_softmax_regression(x: np.ndarray, y: np.ndarray, lr: float = 1e-2,
                           max_iter: int = 1000, tol: float = 1e-5,
                           n_classes: int | None = None) -> SoftmaxRegressionModel:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    if x.shape[0] == 0:
        raise EmptyTrainingSetError("softmax regression needs at least 1 example")
    if x.shape[0] != y.shape[0]:
        raise EmptyTrainingSetError(
            f"got {x.shape[0]} rows but {y.shape[0]} labels")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    xb = _design(x, mean, std)
    onehot = np.eye(n_classes, dtype=np.float64)[y]
    weights = np.zeros((n_classes, xb.shape[1]), dtype=np.float64)
    model = SoftmaxRegressionModel(weights=weights, mean=mean, std=std,
                                   n_classes=n_classes, lr=lr, tol=tol,
                                   n_iter=0, converged=False)
    for it in range(max_iter):
        loss, grad = softmax_gradient(weights, xb, onehot)
        model.loss_history.append(loss)
        if np.max(np.abs(grad)) < tol:
            model.converged = True
            break
        weights -= lr * grad
        model.n_iter = it + 1
    return model


def predict_softmax(model: SoftmaxRegressionModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    xb = _design(x, model.mean, model.std)
    return np.argmax(xb @ model.weights.T, axis=1)


def predict_softmax_proba(model: SoftmaxRegressionModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return softmax(_design(x, model.mean, model.std) @ model.weights.T)
