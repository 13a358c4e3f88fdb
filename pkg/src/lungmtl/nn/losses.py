"""Softmax and cross-entropy with the fused logit gradient."""

import numpy as np

from ..errors import BadTargetError, ShapeMismatchError


def softmax(logits) -> np.ndarray:
    """Row-wise exp-normalize with max subtraction for stability."""
    logits = np.asarray(logits)
    if logits.ndim != 2:
        raise ShapeMismatchError(f"softmax expects (N,K), got {logits.shape}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _target_indices(targets, n, k):
    targets = np.asarray(targets)
    if targets.ndim == 1:
        if targets.shape[0] != n:
            raise BadTargetError(f"expected {n} targets, got {targets.shape[0]}")
        idx = targets.astype(np.intp)
        if idx.size and (idx.min() < 0 or idx.max() >= k):
            raise BadTargetError(f"class index out of range [0, {k})")
        return idx
    if targets.shape != (n, k):
        raise BadTargetError(
            f"one-hot targets must be ({n},{k}), got {targets.shape}")
    rows = targets.sum(axis=1)
    if not (np.allclose(rows, 1.0) and np.allclose(targets.max(axis=1), 1.0)):
        raise BadTargetError("one-hot rows must contain a single 1")
    return targets.argmax(axis=1)


def cross_entropy(probs, targets):
    """Mean negative log-likelihood of normalized rows.

    Returns (loss, dlogits) where dlogits = (probs - onehot)/N is the
    gradient with respect to the logits that produced probs via softmax.
    """
    probs = np.asarray(probs)
    if probs.ndim != 2:
        raise ShapeMismatchError(f"cross_entropy expects (N,K), got {probs.shape}")
    n, k = probs.shape
    idx = _target_indices(targets, n, k)
    loss = -np.mean(np.log(probs[np.arange(n), idx] + 1e-12))
    dlogits = probs / n  # stays in the caller's dtype
    dlogits[np.arange(n), idx] -= 1.0 / n
    return float(loss), dlogits
