"""Versioned model checkpoints as one canonical JSON document.

One format covers both network models (named tensors keyed by qualified
parameter name) and the three risk classifiers (their fitted state).
Tensors serialize as shape + flat row-major number list; documents are
dumped with sorted keys and fixed separators, so save -> load -> save is
byte-identical. Writes are atomic (temp file + rename).
"""

import json
from pathlib import Path

import numpy as np

from .errors import UnreadableCheckpointError
from .ioutil import atomic_write_text
from .mtl import ARCH_IDS, MtlModel, build_model
from .risk.forest import ForestModel, TreeNode
from .risk.softmax import SoftmaxRegressionModel
from .risk.svm import BinarySvm, RbfSvmModel

CHECKPOINT_MAGIC = "lungmtl-checkpoint"
CHECKPOINT_VERSION = 1

_DTYPES = {"float32": np.float32, "float64": np.float64, "int64": np.int64}


def _tensor_doc(arr: np.ndarray) -> dict:
    arr = np.asarray(arr)
    name = "int64" if np.issubdtype(arr.dtype, np.integer) else arr.dtype.name
    if name not in _DTYPES:
        raise UnreadableCheckpointError(f"cannot serialize dtype {arr.dtype}")
    return {"shape": list(arr.shape), "dtype": name,
            "data": arr.reshape(-1).tolist()}


def _tensor_from_doc(doc) -> np.ndarray:
    try:
        arr = np.array(doc["data"], dtype=_DTYPES[doc["dtype"]])
        return arr.reshape(doc["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise UnreadableCheckpointError(f"bad tensor record: {exc}") from exc


# --- network models ---------------------------------------------------------

def _nn_doc(model: MtlModel) -> dict:
    dtype = next(iter(model.parameters().values())).dtype.name
    return {
        "kind": "nn_model",
        "arch_id": model.arch_id,
        "input_shape": list(model.input_shape),
        "dtype": dtype,
        "params": {k: _tensor_doc(v) for k, v in model.parameters().items()},
        "buffers": {k: _tensor_doc(v) for k, v in model.buffers().items()},
    }


def _nn_from_doc(doc) -> MtlModel:
    arch_id = doc.get("arch_id")
    if arch_id not in ARCH_IDS:
        raise UnreadableCheckpointError(f"unknown arch_id {arch_id!r}")
    dtype = _DTYPES.get(doc.get("dtype"))
    if dtype is None:
        raise UnreadableCheckpointError(f"unknown dtype {doc.get('dtype')!r}")
    model = build_model(arch_id, tuple(doc["input_shape"]), seed=0, dtype=dtype)
    for kind, live in (("params", model.parameters()),
                       ("buffers", model.buffers())):
        stored = doc.get(kind, {})
        if set(stored) != set(live):
            raise UnreadableCheckpointError(
                f"{kind} names do not match arch {arch_id!r}: "
                f"missing {sorted(set(live) - set(stored))[:3]}, "
                f"extra {sorted(set(stored) - set(live))[:3]}")
        for name, tensor_doc in stored.items():
            value = _tensor_from_doc(tensor_doc).astype(dtype)
            if value.shape != live[name].shape:
                raise UnreadableCheckpointError(
                    f"{name}: shape {value.shape} != {live[name].shape}")
            # buffers() values alias the layer arrays at this point (no
            # forward pass has replaced them), so in-place copy lands.
            live[name][...] = value
    return model


# --- risk models -------------------------------------------------------------

def _tree_doc(node: TreeNode) -> dict:
    doc = {"counts": _tensor_doc(node.counts)}
    if not node.is_leaf:
        doc["feature"] = int(node.feature)
        doc["threshold"] = float(node.threshold)
        doc["left"] = _tree_doc(node.left)
        doc["right"] = _tree_doc(node.right)
    return doc


def _tree_from_doc(doc) -> TreeNode:
    node = TreeNode(counts=_tensor_from_doc(doc["counts"]))
    if "feature" in doc:
        node.feature = int(doc["feature"])
        node.threshold = float(doc["threshold"])
        node.left = _tree_from_doc(doc["left"])
        node.right = _tree_from_doc(doc["right"])
    return node


def _forest_doc(model: ForestModel) -> dict:
    return {
        "kind": "risk_model", "model_kind": "random_forest",
        "n_classes": model.n_classes, "n_estimators": model.n_estimators,
        "seed": model.seed, "bootstrap": model.bootstrap,
        "max_features": model.max_features,
        "trees": [_tree_doc(t) for t in model.trees],
        "bootstrap_indices": [_tensor_doc(i) for i in model.bootstrap_indices],
    }


def _forest_from_doc(doc) -> ForestModel:
    return ForestModel(
        trees=[_tree_from_doc(t) for t in doc["trees"]],
        n_classes=int(doc["n_classes"]), n_estimators=int(doc["n_estimators"]),
        seed=int(doc["seed"]), bootstrap=bool(doc["bootstrap"]),
        max_features=doc["max_features"],
        bootstrap_indices=[_tensor_from_doc(i).astype(np.intp)
                           for i in doc["bootstrap_indices"]])


def _softmax_doc(model: SoftmaxRegressionModel) -> dict:
    return {
        "kind": "risk_model", "model_kind": "softmax_regression",
        "weights": _tensor_doc(model.weights), "mean": _tensor_doc(model.mean),
        "std": _tensor_doc(model.std), "n_classes": model.n_classes,
        "lr": model.lr, "tol": model.tol, "n_iter": model.n_iter,
        "converged": model.converged,
        "loss_history": [float(v) for v in model.loss_history],
    }


def _softmax_from_doc(doc) -> SoftmaxRegressionModel:
    return SoftmaxRegressionModel(
        weights=_tensor_from_doc(doc["weights"]),
        mean=_tensor_from_doc(doc["mean"]), std=_tensor_from_doc(doc["std"]),
        n_classes=int(doc["n_classes"]), lr=float(doc["lr"]),
        tol=float(doc["tol"]), n_iter=int(doc["n_iter"]),
        converged=bool(doc["converged"]),
        loss_history=list(doc["loss_history"]))


def _svm_doc(model: RbfSvmModel) -> dict:
    machines = [{
        "support_vectors": _tensor_doc(m.support_vectors),
        "dual_coef": _tensor_doc(m.dual_coef), "alpha": _tensor_doc(m.alpha),
        "sv_labels": _tensor_doc(m.sv_labels),
        "sv_indices": _tensor_doc(m.sv_indices), "bias": m.bias,
        "gamma": m.gamma, "c": m.c, "n_iter": m.n_iter,
    } for m in model.machines]
    return {"kind": "risk_model", "model_kind": "rbf_svm",
            "n_classes": model.n_classes, "c": model.c, "gamma": model.gamma,
            "machines": machines}


def _svm_from_doc(doc) -> RbfSvmModel:
    machines = [BinarySvm(
        support_vectors=_tensor_from_doc(m["support_vectors"]),
        dual_coef=_tensor_from_doc(m["dual_coef"]),
        alpha=_tensor_from_doc(m["alpha"]),
        sv_labels=_tensor_from_doc(m["sv_labels"]),
        sv_indices=_tensor_from_doc(m["sv_indices"]).astype(np.intp),
        bias=float(m["bias"]), gamma=float(m["gamma"]), c=float(m["c"]),
        n_iter=int(m["n_iter"])) for m in doc["machines"]]
    return RbfSvmModel(machines=machines, n_classes=int(doc["n_classes"]),
                       c=float(doc["c"]), gamma=float(doc["gamma"]))


_RISK_DOCS = {
    ForestModel: _forest_doc,
    SoftmaxRegressionModel: _softmax_doc,
    RbfSvmModel: _svm_doc,
}
_RISK_LOADERS = {
    "random_forest": _forest_from_doc,
    "softmax_regression": _softmax_from_doc,
    "rbf_svm": _svm_from_doc,
}


# --- public API ---------------------------------------------------------------

def checkpoint_doc(model, feature_fingerprint: str | None = None) -> dict:
    """Self-describing document for a network or risk model."""
    if isinstance(model, MtlModel):
        doc = _nn_doc(model)
    elif type(model) in _RISK_DOCS:
        doc = _RISK_DOCS[type(model)](model)
    else:
        raise UnreadableCheckpointError(
            f"cannot checkpoint object of type {type(model).__name__}")
    doc["format"] = CHECKPOINT_MAGIC
    doc["format_version"] = CHECKPOINT_VERSION
    doc["feature_fingerprint"] = feature_fingerprint
    return doc


def model_from_doc(doc):
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_MAGIC:
        raise UnreadableCheckpointError("not a checkpoint document")
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise UnreadableCheckpointError(
            f"unsupported checkpoint version {doc.get('format_version')!r}")
    kind = doc.get("kind")
    if kind == "nn_model":
        return _nn_from_doc(doc)
    if kind == "risk_model":
        loader = _RISK_LOADERS.get(doc.get("model_kind"))
        if loader is None:
            raise UnreadableCheckpointError(
                f"unknown model_kind {doc.get('model_kind')!r}")
        try:
            return loader(doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise UnreadableCheckpointError(f"bad risk model: {exc}") from exc
    raise UnreadableCheckpointError(f"unknown checkpoint kind {kind!r}")


def dump_checkpoint(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def save_checkpoint(path, model, feature_fingerprint: str | None = None):
    atomic_write_text(path, dump_checkpoint(
        checkpoint_doc(model, feature_fingerprint)))


def read_checkpoint_doc(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise UnreadableCheckpointError(f"no checkpoint at {path}")
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UnreadableCheckpointError(f"{path}: {exc}") from exc


def load_checkpoint(path):
    """Returns (model, document); the document carries the config echo."""
    doc = read_checkpoint_doc(path)
    try:
        return model_from_doc(doc), doc
    except UnreadableCheckpointError as exc:
        raise UnreadableCheckpointError(f"{path}: {exc}") from exc
