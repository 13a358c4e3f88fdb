"""Run configuration: one JSON file, flat CLI-flag overrides, flags win.

The canonical shape is a nested dict of sections whose defaults are taken
from the owning modules' config dataclasses, so a missing file or section
always means "module defaults". Unknown keys are rejected rather than
ignored: a typo silently reverting a knob to its default is the worst
failure mode for reproducible runs.
"""

import copy
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .dsp import MfccConfig
from .errors import BadConfigError, IoError
from .mtl import JointLossConfig, TrainConfig


@dataclass
class PathsConfig:
    audio_dir: str | None = None
    diagnosis_file: str | None = None
    demographics_file: str | None = None
    feature_file: str | None = None
    checkpoint: str | None = None
    history_file: str | None = None
    out_dir: str | None = None


@dataclass
class SplitConfig:
    train_ratio: float = 0.8         # 1.0 means no held-out split
    seed: int = 42

    def __post_init__(self):
        if not (0.0 < self.train_ratio <= 1.0):
            raise ValueError(
                f"split train_ratio must be in (0,1], got {self.train_ratio}")


@dataclass
class RiskConfig:
    model: str = "forest"            # forest | softmax | svm
    n_estimators: int = 100
    seed: int = 42
    max_features: int | None = None
    c: float = 1.0
    gamma: float | None = None
    svm_tol: float = 1e-3
    svm_max_iter: int = 100_000
    lr: float = 1e-2
    max_iter: int = 1000
    tol: float = 1e-5


@dataclass
class RunConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    mfcc: MfccConfig = field(default_factory=MfccConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: JointLossConfig = field(default_factory=JointLossConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    risk: RiskConfig = field(default_factory=RiskConfig)
    arch_id: str = "mobilenet_mtl"
    level: str = "recording"         # corpus granularity: recording | cycle
    seed: int = 0                    # run seed (synthesis verbs)
    workers: int | None = None
    float64: bool = False


# Only these JointLossConfig fields are user-facing; the rest are derived
# from the data at train time.
_LOSS_KEYS = ("w_sound", "w_disease", "lambda_reg")

_SECTIONS = {
    "paths": PathsConfig,
    "mfcc": MfccConfig,
    "train": TrainConfig,
    "loss": JointLossConfig,
    "split": SplitConfig,
    "risk": RiskConfig,
}

_SCALARS = ("arch_id", "level", "seed", "workers", "float64")


def default_config_dict() -> dict:
    loss = JointLossConfig()
    data = {name: asdict(cls()) for name, cls in _SECTIONS.items()
            if name != "loss"}
    data["loss"] = {k: getattr(loss, k) for k in _LOSS_KEYS}
    scalars = RunConfig()
    data.update({k: getattr(scalars, k) for k in _SCALARS})
    return data


def _merge_section(base: dict, update: dict, section: str):
    for key, value in update.items():
        if key not in base:
            raise BadConfigError(f"unknown key {section}.{key!r}")
        base[key] = value


def merge_config_dict(base: dict, update: dict) -> dict:
    for key, value in update.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise BadConfigError(f"section {key!r} must be an object")
            _merge_section(base[key], value, key)
        elif key in _SCALARS:
            base[key] = value
        else:
            raise BadConfigError(f"unknown config key {key!r}")
    return base


def apply_overrides(data: dict, overrides: dict) -> dict:
    """Apply dotted-path overrides ('train.epochs') onto the nested dict."""
    for dotted, value in overrides.items():
        if value is None:
            continue
        parts = dotted.split(".")
        target = data
        for part in parts[:-1]:
            if part not in target or not isinstance(target[part], dict):
                raise BadConfigError(f"unknown override {dotted!r}")
            target = target[part]
        if parts[-1] not in target:
            raise BadConfigError(f"unknown override {dotted!r}")
        target[parts[-1]] = value
    return data


def _build(cls, data: dict, section: str):
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise BadConfigError(f"bad [{section}] config: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    merged = merge_config_dict(default_config_dict(), data)
    return run_config_from_merged(merged)


def run_config_from_merged(data: dict) -> RunConfig:
    return RunConfig(
        paths=_build(PathsConfig, data["paths"], "paths"),
        mfcc=_build(MfccConfig, data["mfcc"], "mfcc"),
        train=_build(TrainConfig, data["train"], "train"),
        loss=_build(JointLossConfig, data["loss"], "loss"),
        split=_build(SplitConfig, data["split"], "split"),
        risk=_build(RiskConfig, data["risk"], "risk"),
        arch_id=data["arch_id"], level=data["level"], seed=data["seed"],
        workers=data["workers"], float64=data["float64"])


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise IoError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BadConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise BadConfigError(f"{path}: top level must be an object")
    return data


def build_run_config(config_path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults <- config file <- CLI overrides (later wins)."""
    data = default_config_dict()
    if config_path is not None:
        merge_config_dict(data, load_config_file(config_path))
    if overrides:
        apply_overrides(data, overrides)
    return run_config_from_merged(data)


def config_doc(cfg: RunConfig) -> dict:
    """Plain-dict echo of a RunConfig for output headers."""
    data = {name: asdict(getattr(cfg, name)) for name in _SECTIONS
            if name != "loss"}
    data["loss"] = {k: getattr(cfg.loss, k) for k in _LOSS_KEYS}
    data.update({k: getattr(cfg, k) for k in _SCALARS})
    return copy.deepcopy(data)


# A rename in JointLossConfig must fail loudly here at import, not by
# silently dropping the key from configs.
assert set(_LOSS_KEYS) <= {f.name for f in fields(JointLossConfig)}
