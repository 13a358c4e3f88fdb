"""Joint lung sound / disease classification and COPD risk rating.

Layout:
  corpus      audio / annotation / demographics ingestion, splits, synthesis
  dsp         MFCC extraction built on an in-house FFT/DCT
  nn          minimal tensor layers with hand-written backprop
  mtl         shared-trunk two-head models, joint loss, training loop
  metrics     confusion / report / ROC-AUC / training history tables
  risk        rule-based risk levels + three from-scratch classifiers
  checkpoint  versioned text checkpoints for every model kind
  config/cli  layered run configuration and the command-line verbs
"""

__version__ = "0.1.0"

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, build_run_config
from .corpus import (AudioClip, DemographicRecord, DiseaseLabel, Gender,
                     LabeledExample, SoundLabel, load_corpus,
                     parse_demographics, read_wav, stratified_split,
                     synth_corpus, synth_demographics, write_synth_corpus)
from .dsp import (FeatureMatrix, MfccConfig, MfccExtractor, extract_mfcc,
                  read_features, write_features)
from .errors import LungMtlError
from .metrics import ConfusionMatrix, EvalReport, RocCurve, confusion, report, roc_auc
from .mtl import (ARCH_IDS, JointLossConfig, MtlModel, MultiTaskNetClassifier,
                  TrainConfig, build_model, predict, train)
from .risk import (RandomForest, RbfSvm, RiskLevel, SoftmaxRegression,
                   assign_risk, fit_forest, fit_rbf_svm,
                   fit_softmax_regression, predict_risk, rule_labels,
                   to_features)

__all__ = [
    "ARCH_IDS",
    "AudioClip",
    "ConfusionMatrix",
    "DemographicRecord",
    "DiseaseLabel",
    "EvalReport",
    "FeatureMatrix",
    "Gender",
    "JointLossConfig",
    "LabeledExample",
    "LungMtlError",
    "MfccConfig",
    "MfccExtractor",
    "MtlModel",
    "MultiTaskNetClassifier",
    "RandomForest",
    "RbfSvm",
    "RiskLevel",
    "RocCurve",
    "RunConfig",
    "SoftmaxRegression",
    "SoundLabel",
    "TrainConfig",
    "__version__",
    "assign_risk",
    "build_model",
    "build_run_config",
    "confusion",
    "extract_mfcc",
    "fit_forest",
    "fit_rbf_svm",
    "fit_softmax_regression",
    "load_checkpoint",
    "load_corpus",
    "parse_demographics",
    "predict",
    "predict_risk",
    "read_features",
    "read_wav",
    "report",
    "roc_auc",
    "rule_labels",
    "save_checkpoint",
    "stratified_split",
    "synth_corpus",
    "synth_demographics",
    "to_features",
    "train",
    "write_features",
    "write_synth_corpus",
]
