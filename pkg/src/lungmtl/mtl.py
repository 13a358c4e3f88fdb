"""Shared-trunk multi-task models: one spectro-temporal input, two softmax
heads (4 sound classes, 6 disease classes).

Two architectures share the head design: a MobileNet-style trunk built from
depthwise-separable bottlenecks, and a plain strided-conv baseline. Both
heads read the same global-average-pooled trunk vector (hard parameter
sharing), so the trunk is paid for once per example.
"""

import time
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .corpus import N_DISEASE_CLASSES, N_SOUND_CLASSES
from .errors import (
    DivergenceError,
    EmptyTrainingSetError,
    ShapeMismatchError,
    UnknownArchError,
)
from .nn import (
    Adam,
    BatchNorm2D,
    Conv2D,
    Dense,
    DepthwiseConv2D,
    GlobalAvgPool,
    PointwiseConv2D,
    ReLU,
    cross_entropy,
    flop_count,
    resolve_shapes,
    softmax,
)
from .validation import as_float_array, as_label_array, check_fitted

HEAD_HIDDEN = 128


@dataclass
class JointLossConfig:
    """Weights of the two-task objective L = w_s*CE_s + w_d*CE_d + lambda*||W||^2.

    The regularizer covers convolution and dense weights only; biases and
    batch-norm parameters are excluded. M, sample counts, and the feature
    dimension are carried for reporting.
    """
    w_sound: float = 1.0
    w_disease: float = 1.0
    lambda_reg: float = 1e-4
    n_tasks: int = 2
    n_examples: int | None = None
    feature_dim: int | None = None

    def __post_init__(self):
        if self.w_sound <= 0 or self.w_disease <= 0:
            raise ValueError("task weights must be positive")
        if self.lambda_reg < 0:
            raise ValueError("lambda_reg must be >= 0")


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 16
    seed: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


def bottleneck_block(in_channels, out_channels, stride, rng, dtype=np.float32):
    """Depthwise 3x3 (+BN+ReLU) then pointwise to out_channels (+BN+ReLU)."""
    return [
        DepthwiseConv2D(in_channels, 3, stride=stride, padding=1, rng=rng,
                        dtype=dtype),
        BatchNorm2D(in_channels, dtype=dtype),
        ReLU(),
        PointwiseConv2D(in_channels, out_channels, rng=rng, dtype=dtype),
        BatchNorm2D(out_channels, dtype=dtype),
        ReLU(),
    ]


def _make_heads(gap_dim, rng, dtype):
    sound_head = [Dense(gap_dim, HEAD_HIDDEN, rng=rng, dtype=dtype), ReLU(),
                  Dense(HEAD_HIDDEN, N_SOUND_CLASSES, rng=rng, dtype=dtype)]
    disease_head = [Dense(gap_dim, HEAD_HIDDEN, rng=rng, dtype=dtype), ReLU(),
                    Dense(HEAD_HIDDEN, N_DISEASE_CLASSES, rng=rng, dtype=dtype)]
    return sound_head, disease_head


class MtlModel:
    """Trunk + two heads. Heads end in logits; softmax is applied in
    forward so the fused cross-entropy gradient can enter at the logits."""

    def __init__(self, arch_id, input_shape, trunk, sound_head, disease_head):
        self.arch_id = arch_id
        self.input_shape = tuple(input_shape)
        self.trunk = trunk
        self.sound_head = sound_head
        self.disease_head = disease_head

    def _sections(self):
        return (("trunk", self.trunk), ("sound_head", self.sound_head),
                ("disease_head", self.disease_head))

    def parameters(self) -> dict:
        out = {}
        for section, layers in self._sections():
            for i, layer in enumerate(layers):
                for name, value in layer.params.items():
                    out[f"{section}.{i}.{name}"] = value
        return out

    def gradients(self) -> dict:
        out = {}
        for section, layers in self._sections():
            for i, layer in enumerate(layers):
                for name in layer.params:
                    out[f"{section}.{i}.{name}"] = layer.grads[name]
        return out

    def weight_params(self) -> dict:
        """Parameters subject to L2: conv/dense kernels, not biases or BN."""
        return {key: value for key, value in self.parameters().items()
                if key.endswith(".w")}

    def buffers(self) -> dict:
        """Non-trained state (batch-norm running stats), by qualified name."""
        out = {}
        for section, layers in self._sections():
            for i, layer in enumerate(layers):
                for name, value in layer.buffers.items():
                    out[f"{section}.{i}.{name}"] = value
        return out

    def forward(self, x, train=False):
        x = np.asarray(x)
        if x.ndim != 4 or x.shape[1:] != self.input_shape:
            raise ShapeMismatchError(
                f"expected (N,)+{self.input_shape}, got {x.shape}")
        for layer in self.trunk:
            x = layer.forward(x, train=train)
        sound = x
        for layer in self.sound_head:
            sound = layer.forward(sound, train=train)
        disease = x
        for layer in self.disease_head:
            disease = layer.forward(disease, train=train)
        return softmax(sound), softmax(disease)

    def backward(self, dsound_logits, ddisease_logits):
        """Reverse the last train-mode forward; returns the input gradient."""
        dsound = dsound_logits
        for layer in reversed(self.sound_head):
            dsound = layer.backward(dsound)
        ddisease = ddisease_logits
        for layer in reversed(self.disease_head):
            ddisease = layer.backward(ddisease)
        dx = dsound + ddisease
        for layer in reversed(self.trunk):
            dx = layer.backward(dx)
        return dx

    def flops(self) -> dict:
        """MAC counts per section for one example."""
        gap_shape = resolve_shapes(self.trunk, self.input_shape)[-1]
        trunk = flop_count(self.trunk, self.input_shape)
        sound = flop_count(self.sound_head, gap_shape)
        disease = flop_count(self.disease_head, gap_shape)
        return {"trunk": trunk, "sound_head": sound, "disease_head": disease,
                "total": trunk + sound + disease}


ARCH_IDS = ("mobilenet_mtl", "cnn2d_mtl")


def build_model(arch_id, input_shape, seed, dtype=np.float32) -> MtlModel:
    """Assemble a fully initialized model; same seed, same parameters."""
    if arch_id not in ARCH_IDS:
        raise UnknownArchError(f"unknown architecture {arch_id!r}; "
                               f"expected one of {ARCH_IDS}")
    input_shape = tuple(input_shape)
    if len(input_shape) != 3 or input_shape[0] != 1:
        raise ShapeMismatchError(
            f"input_shape must be (1, n_coefficients, target_frames), "
            f"got {input_shape}")
    rng = np.random.default_rng(seed)
    if arch_id == "mobilenet_mtl":
        trunk = [Conv2D(1, 16, 3, stride=2, padding=1, rng=rng, dtype=dtype)]
        trunk += bottleneck_block(16, 32, 2, rng, dtype)
        trunk += bottleneck_block(32, 64, 2, rng, dtype)
        trunk += bottleneck_block(64, 128, 2, rng, dtype)
        trunk += bottleneck_block(128, 256, 2, rng, dtype)
        trunk += [Conv2D(256, 256, 3, stride=1, padding=1, rng=rng, dtype=dtype)]
        trunk += bottleneck_block(256, 256, 1, rng, dtype)
        trunk += [GlobalAvgPool()]
    else:
        trunk = [
            Conv2D(1, 16, 3, stride=1, padding=1, rng=rng, dtype=dtype), ReLU(),
            Conv2D(16, 32, 3, stride=2, padding=1, rng=rng, dtype=dtype), ReLU(),
            Conv2D(32, 64, 3, stride=2, padding=1, rng=rng, dtype=dtype), ReLU(),
            GlobalAvgPool(),
        ]
    gap_dim = resolve_shapes(trunk, input_shape)[-1][0]
    sound_head, disease_head = _make_heads(gap_dim, rng, dtype)
    return MtlModel(arch_id, input_shape, trunk, sound_head, disease_head)


def joint_loss(sound_probs, disease_probs, sound_targets, disease_targets,
               model: MtlModel, cfg: JointLossConfig):
    """Weighted two-task cross-entropy plus L2 on the concatenated weights.

    Returns (loss, dsound_logits, ddisease_logits, reg_grads); the logit
    gradients are already task-weighted, reg_grads maps parameter keys to
    2*lambda*W.
    """
    sound_probs = np.asarray(sound_probs)
    disease_probs = np.asarray(disease_probs)
    if sound_probs.shape[0] != disease_probs.shape[0]:
        raise ShapeMismatchError(
            f"batch sizes differ: {sound_probs.shape[0]} vs "
            f"{disease_probs.shape[0]}")
    ce_sound, dsound = cross_entropy(sound_probs, sound_targets)
    ce_disease, ddisease = cross_entropy(disease_probs, disease_targets)
    loss = cfg.w_sound * ce_sound + cfg.w_disease * ce_disease
    reg_grads = {}
    if cfg.lambda_reg > 0:
        for key, w in model.weight_params().items():
            loss += cfg.lambda_reg * float(np.sum(w * w))
            reg_grads[key] = 2.0 * cfg.lambda_reg * w
    return (float(loss), cfg.w_sound * dsound, cfg.w_disease * ddisease,
            reg_grads)


def predict(model: MtlModel, features):
    """Inference pass: (sound probs, disease probs, argmax per head).

    Ties break toward the lower class index. Accepts (N, C, T) features or
    an already channeled (N, 1, C, T) batch.
    """
    x = np.asarray(features)
    if x.ndim == 3:
        x = x[:, None, :, :]
    sound_probs, disease_probs = model.forward(x, train=False)
    return (sound_probs, disease_probs,
            sound_probs.argmax(axis=1), disease_probs.argmax(axis=1))


def _accuracy(pred, true):
    return float(np.mean(pred == np.asarray(true))) if len(true) else 0.0


def train(model: MtlModel, train_data, val_data, train_cfg: TrainConfig,
          loss_cfg: JointLossConfig):
    """Seeded shuffle -> batches -> forward -> joint loss -> backward -> Adam.

    train_data/val_data are (features, sound_labels, disease_labels);
    features are (N, C, T) or (N, 1, C, T). Returns (model, history) with
    one record per epoch; no early stopping. Accuracies are measured on the
    validation set when given, otherwise on the training set.
    """
    x, y_sound, y_disease = train_data
    x = np.asarray(x)
    if x.ndim == 3:
        x = x[:, None, :, :]
    n = x.shape[0]
    if n == 0:
        raise EmptyTrainingSetError("training set is empty")
    y_sound = as_label_array(y_sound, n=n, name="sound labels")
    y_disease = as_label_array(y_disease, n=n, name="disease labels")
    dtype = model.parameters()[next(iter(model.parameters()))].dtype
    x = x.astype(dtype, copy=False)
    loss_cfg = replace(loss_cfg, n_examples=n,
                       feature_dim=int(np.prod(model.input_shape)))

    optimizer = Adam(model.parameters(), lr=train_cfg.lr,
                     beta1=train_cfg.beta1, beta2=train_cfg.beta2,
                     eps=train_cfg.eps)
    rng = np.random.default_rng(train_cfg.seed)
    history = []
    for epoch in range(1, train_cfg.epochs + 1):
        started = time.perf_counter()
        perm = rng.permutation(n)
        epoch_loss = 0.0
        steps = 0
        for lo in range(0, n, train_cfg.batch_size):
            batch = perm[lo: lo + train_cfg.batch_size]
            sound_probs, disease_probs = model.forward(x[batch], train=True)
            loss, dsound, ddisease, reg_grads = joint_loss(
                sound_probs, disease_probs, y_sound[batch], y_disease[batch],
                model, loss_cfg)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss {loss} at epoch {epoch}, step {steps + 1}")
            model.backward(dsound.astype(dtype), ddisease.astype(dtype))
            grads = model.gradients()
            for key, g in reg_grads.items():
                grads[key] = grads[key] + g
            optimizer.step(grads)
            epoch_loss += loss * batch.size
            steps += 1

        record = {"epoch": epoch, "train_loss": epoch_loss / n,
                  "val_loss": None, "steps": steps}
        if val_data is not None:
            xv, yv_sound, yv_disease = val_data
            xv = np.asarray(xv)
            if xv.ndim == 3:
                xv = xv[:, None, :, :]
            sp, dp, s_hat, d_hat = predict(model, xv.astype(dtype, copy=False))
            val_loss, _, _, _ = joint_loss(sp, dp, yv_sound, yv_disease,
                                           model, loss_cfg)
            record["val_loss"] = val_loss
            record["sound_acc"] = _accuracy(s_hat, yv_sound)
            record["disease_acc"] = _accuracy(d_hat, yv_disease)
        else:
            _, _, s_hat, d_hat = predict(model, x)
            record["sound_acc"] = _accuracy(s_hat, y_sound)
            record["disease_acc"] = _accuracy(d_hat, y_disease)
        record["wall_time_s"] = time.perf_counter() - started
        history.append(record)
    return model, history


class MultiTaskNetClassifier(BaseEstimator, ClassifierMixin):
    """Estimator facade: X is (n, C, T) features, y is (n, 2) label pairs
    (sound class, disease class)."""

    def __init__(self, arch="mobilenet_mtl", epochs=20, batch_size=16,
                 lr=1e-3, w_sound=1.0, w_disease=1.0, lambda_reg=1e-4, seed=0):
        self.arch = arch
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.w_sound = w_sound
        self.w_disease = w_disease
        self.lambda_reg = lambda_reg
        self.seed = seed

    def fit(self, X, y):
        X = as_float_array(X, ndim=3, dtype=np.float32, name="X")
        y = np.asarray(y)
        if y.ndim != 2 or y.shape != (X.shape[0], 2):
            raise ShapeMismatchError(
                f"y must be (n, 2) label pairs, got {y.shape}")
        y_sound = as_label_array(y[:, 0], name="y[:, 0]")
        y_disease = as_label_array(y[:, 1], name="y[:, 1]")
        self.model_ = build_model(self.arch, (1,) + X.shape[1:], self.seed)
        _, self.history_ = train(
            self.model_, (X, y_sound, y_disease), None,
            TrainConfig(epochs=self.epochs, batch_size=self.batch_size,
                        seed=self.seed, lr=self.lr),
            JointLossConfig(w_sound=self.w_sound, w_disease=self.w_disease,
                            lambda_reg=self.lambda_reg))
        return self

    def predict(self, X):
        check_fitted(self, "model_")
        X = as_float_array(X, ndim=3, dtype=np.float32, name="X")
        _, _, sound, disease = predict(self.model_, X)
        return np.stack([sound, disease], axis=1)

    def predict_proba(self, X):
        check_fitted(self, "model_")
        X = as_float_array(X, ndim=3, dtype=np.float32, name="X")
        sound_probs, disease_probs, _, _ = predict(self.model_, X)
        return sound_probs, disease_probs
