"""Demographic COPD risk rating: rule table plus three learned models."""

from .estimators import (RandomForest, RbfSvm, SoftmaxRegression,
                         predict_model, predict_risk)
from .forest import (ForestModel, TreeNode, best_split, fit_forest,
                     gini_impurity, predict_forest, tree_predict)
from .rubric import (N_RISK_CLASSES, RISK_CLASS_NAMES, BmiCategory, RiskLevel,
                     assign_risk, bmi_category, rule_labels, to_features)
from .softmax import (SoftmaxRegressionModel, fit_softmax_regression,
                      predict_softmax, predict_softmax_proba, softmax_gradient)
from .svm import (BinarySvm, RbfSvmModel, fit_binary_svm, fit_rbf_svm,
                  predict_svm, rbf_kernel, svm_decision, svm_decisions)

__all__ = [
    "BinarySvm", "BmiCategory", "ForestModel", "N_RISK_CLASSES",
    "RISK_CLASS_NAMES", "RandomForest", "RbfSvm", "RbfSvmModel", "RiskLevel",
    "SoftmaxRegression", "SoftmaxRegressionModel", "TreeNode", "assign_risk",
    "best_split", "bmi_category", "fit_binary_svm", "fit_forest",
    "fit_rbf_svm", "fit_softmax_regression", "gini_impurity", "predict_forest",
    "predict_model", "predict_risk", "predict_softmax",
    "predict_softmax_proba", "predict_svm", "rbf_kernel", "rule_labels",
    "softmax_gradient", "svm_decision", "svm_decisions", "to_features",
    "tree_predict",
]
