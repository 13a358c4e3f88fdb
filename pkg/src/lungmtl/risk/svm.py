"""RBF-kernel SVM trained by SMO, one-vs-rest for multiclass.

The binary solver keeps the dual gradient G = Q @ alpha - 1 incrementally
up to date and always steps the maximal violating pair: i maximizing
-y*G over the up-movable set, j minimizing it over the down-movable set.
It stops when the violation gap m - M falls within tol, which bounds
every KKT residual by tol; the bias is the midpoint b = (m + M) / 2.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyTrainingSetError, NoConvergenceError

DEFAULT_C = 1.0
DEFAULT_TOL = 1e-3


def _snap(a: float, c: float) -> float:
    """Clamp a multiplier onto a box bound it is within one rounding of.

    Without this a point can sit one ulp inside the box: the working-set
    masks call it movable while its clipped step rounds to zero, and the
    pair selection livelocks on it.
    """
    if a < 1e-12:
        return 0.0
    if a > c - 1e-12:
        return c
    return float(a)


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * ||a_i - b_j||^2) for all pairs, clipped at 0 exponent."""
    sq = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
          - 2.0 * (a @ b.T))
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class BinarySvm:
    support_vectors: np.ndarray   # (n_sv, D)
    dual_coef: np.ndarray         # (n_sv,) alpha_i * y_i
    alpha: np.ndarray             # (n_sv,) alpha_i > 0
    sv_labels: np.ndarray         # (n_sv,) +1/-1
    sv_indices: np.ndarray        # positions in the training set
    bias: float
    gamma: float
    c: float
    n_iter: int


def svm_decision(machine: BinarySvm, x: np.ndarray) -> np.ndarray:
    if machine.support_vectors.shape[0] == 0:
        return np.full(x.shape[0], machine.bias, dtype=np.float64)
    k = rbf_kernel(x, machine.support_vectors, machine.gamma)
    return k @ machine.dual_coef + machine.bias


def fit_binary_svm(x: np.ndarray, y: np.ndarray, c: float = DEFAULT_C,
                   gamma: float | None = None, tol: float = DEFAULT_TOL,
                   max_iter: int = 100_000) -> BinarySvm:
    """y must be +1/-1. Raises NoConvergenceError at the iteration cap."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        raise EmptyTrainingSetError("SVM needs at least 1 example")
    if gamma is None:
        gamma = 1.0 / x.shape[1]
    if np.all(y > 0) or np.all(y < 0):
        # Degenerate one-vs-rest problem: constant decision at the label sign.
        return BinarySvm(support_vectors=x[:0], dual_coef=np.zeros(0),
                         alpha=np.zeros(0), sv_labels=np.zeros(0),
                         sv_indices=np.zeros(0, dtype=np.intp),
                         bias=float(np.sign(y[0])), gamma=gamma, c=c, n_iter=0)

    kmat = rbf_kernel(x, x, gamma)
    alpha = np.zeros(n, dtype=np.float64)
    grad = -np.ones(n, dtype=np.float64)  # G = Q @ alpha - 1 at alpha = 0
    pos = y > 0
    bias = 0.0
    it = 0
    gap = np.inf
    for it in range(1, max_iter + 1):
        movable_up = (alpha < c) & pos | (alpha > 0) & ~pos
        movable_dn = (alpha < c) & ~pos | (alpha > 0) & pos
        neg_yg = -y * grad
        up_vals = np.where(movable_up, neg_yg, -np.inf)
        dn_vals = np.where(movable_dn, neg_yg, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(dn_vals))
        m_up, m_dn = up_vals[i], dn_vals[j]
        gap = m_up - m_dn
        if gap <= tol:
            bias = float((m_up + m_dn) / 2.0)
            break
        eta = max(kmat[i, i] + kmat[j, j] - 2.0 * kmat[i, j], 1e-12)
        err_i = y[i] * grad[i]  # f(x_i) - y_i without bias
        err_j = y[j] * grad[j]
        if y[i] != y[j]:
            lo = max(0.0, alpha[j] - alpha[i])
            hi = min(c, c + alpha[j] - alpha[i])
        else:
            lo = max(0.0, alpha[i] + alpha[j] - c)
            hi = min(c, alpha[i] + alpha[j])
        a_j = np.clip(alpha[j] + y[j] * (err_i - err_j) / eta, lo, hi)
        a_j = _snap(a_j, c)
        a_i = _snap(alpha[i] + y[i] * y[j] * (alpha[j] - a_j), c)
        d_i, d_j = a_i - alpha[i], a_j - alpha[j]
        grad += y * (y[i] * kmat[:, i] * d_i + y[j] * kmat[:, j] * d_j)
        alpha[i], alpha[j] = a_i, a_j
    else:
        raise NoConvergenceError(
            f"SMO residual {gap:.3e} > tol {tol:g} after {max_iter} iterations")

    sv = np.flatnonzero(alpha > 1e-12)
    return BinarySvm(support_vectors=x[sv], dual_coef=alpha[sv] * y[sv],
                     alpha=alpha[sv], sv_labels=y[sv], sv_indices=sv,
                     bias=bias, gamma=gamma, c=c, n_iter=it)


@dataclass
class RbfSvmModel:
    machines: list                # one BinarySvm per class (one-vs-rest)
    n_classes: int
    c: float
    gamma: float
    kind: str = "rbf_svm"


def fit_rbf_svm(x: np.ndarray, y: np.ndarray, c: float = DEFAULT_C,
                gamma: float | None = None, tol: float = DEFAULT_TOL,
                max_iter: int = 100_000,
                n_classes: int | None = None) -> RbfSvmModel:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    if x.shape[0] == 0:
        raise EmptyTrainingSetError("SVM needs at least 1 example")
    if x.shape[0] != y.shape[0]:
        raise EmptyTrainingSetError(
            f"got {x.shape[0]} rows but {y.shape[0]} labels")
    if gamma is None:
        gamma = 1.0 / x.shape[1]
    if n_classes is None:
        n_classes = int(y.max()) + 1
    machines = []
    for cls in range(n_classes):
        target = np.where(y == cls, 1.0, -1.0)
        machines.append(fit_binary_svm(x, target, c=c, gamma=gamma,
                                       tol=tol, max_iter=max_iter))
    return RbfSvmModel(machines=machines, n_classes=n_classes, c=c, gamma=gamma)


def svm_decisions(model: RbfSvmModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.stack([svm_decision(m, x) for m in model.machines], axis=1)


def predict_svm(model: RbfSvmModel, x: np.ndarray) -> np.ndarray:
    return np.argmax(svm_decisions(model, x), axis=1)
