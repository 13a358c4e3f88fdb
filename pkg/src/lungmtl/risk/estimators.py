"""Estimator wrappers and record-level risk prediction.

The fit_* functions in forest/softmax/svm are the primitive API; the
classes here wrap them in the fit/predict estimator protocol, and
predict_risk evaluates a fitted model against the rubric labels of the
records it is given.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .. import metrics
from ..errors import UnfittedModelError
from ..validation import as_float_array, as_label_array, check_fitted
from .forest import ForestModel, fit_forest, predict_forest
from .rubric import N_RISK_CLASSES, RiskLevel, rule_labels, to_features
from .softmax import (SoftmaxRegressionModel, fit_softmax_regression,
                      predict_softmax, predict_softmax_proba)
from .svm import DEFAULT_C, DEFAULT_TOL, RbfSvmModel, fit_rbf_svm, predict_svm


def predict_model(model, features: np.ndarray) -> np.ndarray:
    """Dispatch prediction over any fitted risk model."""
    if isinstance(model, ForestModel):
        return predict_forest(model, features)
    if isinstance(model, SoftmaxRegressionModel):
        return predict_softmax(model, features)
    if isinstance(model, RbfSvmModel):
        return predict_svm(model, features)
    if hasattr(model, "predict"):
        return np.asarray(model.predict(features))
    raise UnfittedModelError(f"not a fitted risk model: {model!r}")


def predict_risk(model, records):
    """Predict risk levels for demographic records and score vs the rubric.

    Returns (levels, report): levels is a list of RiskLevel, report an
    EvalReport of the predictions against the rule-assigned labels.
    """
    if model is None:
        raise UnfittedModelError("predict_risk needs a fitted model")
    records = list(records)
    truth = rule_labels(records)
    preds = predict_model(model, to_features(records))
    cm = metrics.confusion(truth, preds, N_RISK_CLASSES)
    return [RiskLevel(int(p)) for p in preds], metrics.report(cm)


class RandomForest(BaseEstimator, ClassifierMixin):
    """Bagged CART trees; deterministic for a fixed seed."""

    def __init__(self, n_estimators: int = 100, seed: int = 42,
                 bootstrap: bool = True, max_features: int | None = None):
        self.n_estimators = n_estimators
        self.seed = seed
        self.bootstrap = bootstrap
        self.max_features = max_features

    def fit(self, X, y):
        X = as_float_array(X)
        y = as_label_array(y, n=X.shape[0])
        self.model_ = fit_forest(X, y, n_estimators=self.n_estimators,
                                 seed=self.seed, bootstrap=self.bootstrap,
                                 max_features=self.max_features)
        self.classes_ = np.arange(self.model_.n_classes)
        return self

    def predict(self, X):
        check_fitted(self, "model_")
        return predict_forest(self.model_, as_float_array(X))


class SoftmaxRegression(BaseEstimator, ClassifierMixin):
    """Multinomial logistic regression, full-batch gradient descent."""

    def __init__(self, lr: float = 1e-2, max_iter: int = 1000,
                 tol: float = 1e-5):
        self.lr = lr
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X = as_float_array(X)
        y = as_label_array(y, n=X.shape[0])
        self.model_ = fit_softmax_regression(X, y, lr=self.lr,
                                             max_iter=self.max_iter,
                                             tol=self.tol)
        self.classes_ = np.arange(self.model_.n_classes)
        return self

    def predict(self, X):
        check_fitted(self, "model_")
        return predict_softmax(self.model_, as_float_array(X))

    def predict_proba(self, X):
        check_fitted(self, "model_")
        return predict_softmax_proba(self.model_, as_float_array(X))


class RbfSvm(BaseEstimator, ClassifierMixin):
    """One-vs-rest RBF SVM trained by SMO."""

    def __init__(self, c: float = DEFAULT_C, gamma: float | None = None,
                 tol: float = DEFAULT_TOL, max_iter: int = 100_000):
        self.c = c
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X = as_float_array(X)
        y = as_label_array(y, n=X.shape[0])
        self.model_ = fit_rbf_svm(X, y, c=self.c, gamma=self.gamma,
                                  tol=self.tol, max_iter=self.max_iter)
        self.classes_ = np.arange(self.model_.n_classes)
        return self

    def predict(self, X):
        check_fitted(self, "model_")
        return predict_svm(self.model_, as_float_array(X))
