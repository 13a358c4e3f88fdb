"""Dense-tensor layers with explicit forward/backward passes.

Conventions shared by every layer:
  - forward(x, train=False); train mode caches what backward needs.
  - backward(dout) consumes the cache (a second call, or a call without a
    train-mode forward, raises StaleCacheError), writes parameter gradients
    into self.grads, and returns the input gradient.
  - out_shape/macs operate on unbatched static shapes for cost accounting.
  - 32-bit parameters by default; pass dtype=np.float64 for gradient checks.
"""

import numpy as np

from ..errors import ShapeMismatchError, StaleCacheError, UnresolvedShapeError


def kaiming_uniform(rng, shape, fan_in, dtype):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def _conv_extent(size, kernel, stride, padding):
    out = (size + 2 * padding - kernel) // stride + 1
    if out < 1:
        raise UnresolvedShapeError(
            f"kernel {kernel} with stride {stride}, padding {padding} does not "
            f"fit extent {size}")
    return out


class Layer:
    KIND = "layer"

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.params: dict = {}
        self.grads: dict = {}
        self.buffers: dict = {}
        self.hyper: dict = {}
        self._cache = None

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, dout):
        if self._cache is None:
            raise StaleCacheError(
                f"{self.KIND}: backward without a matching train-mode forward")
        cache, self._cache = self._cache, None
        return self._backward(np.asarray(dout), cache)

    def _backward(self, dout, cache):
        raise NotImplementedError

    # static shape walk (unbatched), used for cost accounting
    def out_shape(self, shape):
        return tuple(shape)

    def macs(self, shape):
        return 0


def _require(cond, message):
    if not cond:
        raise ShapeMismatchError(message)


def im2col(x, kh, kw, stride, out_h, out_w):
    """(N, C, H, W) -> (N, C*kh*kw, out_h*out_w) patch matrix."""
    n, c = x.shape[:2]
    cols = np.empty((n, c, kh, kw, out_h, out_w), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = x[:, :, i: i + stride * out_h: stride,
                                 j: j + stride * out_w: stride]
    return cols.reshape(n, c * kh * kw, out_h * out_w)


def col2im(cols, padded_shape, kh, kw, stride, out_h, out_w):
    """Adjoint of im2col: scatter-add patches back onto the padded grid."""
    n, c, h, w = padded_shape
    x = np.zeros(padded_shape, dtype=cols.dtype)
    cols = cols.reshape(n, c, kh, kw, out_h, out_w)
    for i in range(kh):
        for j in range(kw):
            x[:, :, i: i + stride * out_h: stride,
              j: j + stride * out_w: stride] += cols[:, :, i, j]
    return x


class Conv2D(Layer):
    KIND = "Conv2D"

    def __init__(self, in_channels, out_channels, kernel_size, stride=1,
                 padding=0, bias=True, rng=None, dtype=np.float32):
        super().__init__(dtype)
        rng = rng if rng is not None else np.random.default_rng()
        kh = kw = int(kernel_size)
        self.hyper = {"in_channels": in_channels, "out_channels": out_channels,
                      "kernel_size": kh, "stride": int(stride),
                      "padding": int(padding), "bias": bool(bias)}
        self.params["w"] = kaiming_uniform(
            rng, (out_channels, in_channels, kh, kw),
            fan_in=in_channels * kh * kw, dtype=self.dtype)
        if bias:
            self.params["b"] = np.zeros(out_channels, dtype=self.dtype)

    def forward(self, x, train=False):
        x = np.asarray(x)
        h = self.hyper
        _require(x.ndim == 4 and x.shape[1] == h["in_channels"],
                 f"{self.KIND}: expected (N,{h['in_channels']},H,W), got {x.shape}")
        k, s, p = h["kernel_size"], h["stride"], h["padding"]
        _require(k <= x.shape[2] + 2 * p and k <= x.shape[3] + 2 * p,
                 f"{self.KIND}: kernel {k} larger than padded input {x.shape}")
        out_h = (x.shape[2] + 2 * p - k) // s + 1
        out_w = (x.shape[3] + 2 * p - k) // s + 1
        if p:
            x = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        cols = im2col(x, k, k, s, out_h, out_w)
        w2d = self.params["w"].reshape(h["out_channels"], -1)
        out = np.matmul(w2d, cols)
        if "b" in self.params:
            out = out + self.params["b"][None, :, None]
        out = out.reshape(x.shape[0], h["out_channels"], out_h, out_w)
        if train:
            self._cache = (cols, x.shape, out_h, out_w)
        return out

    def _backward(self, dout, cache):
        cols, padded_shape, out_h, out_w = cache
        h = self.hyper
        k, s, p = h["kernel_size"], h["stride"], h["padding"]
        dflat = dout.reshape(dout.shape[0], h["out_channels"], -1)
        self.grads["w"] = np.einsum("nfp,ncp->fc", dflat, cols).reshape(
            self.params["w"].shape)
        if "b" in self.params:
            self.grads["b"] = dflat.sum(axis=(0, 2))
        w2d = self.params["w"].reshape(h["out_channels"], -1)
        dcols = np.matmul(w2d.T, dflat)
        dx = col2im(dcols, padded_shape, k, k, s, out_h, out_w)
        if p:
            dx = dx[:, :, p:-p, p:-p]
        return dx

    def out_shape(self, shape):
        if len(shape) != 3 or shape[0] != self.hyper["in_channels"]:
            raise UnresolvedShapeError(f"{self.KIND}: cannot consume shape {shape}")
        k, s, p = (self.hyper["kernel_size"], self.hyper["stride"],
                   self.hyper["padding"])
        return (self.hyper["out_channels"],
                _conv_extent(shape[1], k, s, p), _conv_extent(shape[2], k, s, p))

    def macs(self, shape):
        f, out_h, out_w = self.out_shape(shape)
        k = self.hyper["kernel_size"]
        return k * k * shape[0] * f * out_h * out_w


class DepthwiseConv2D(Layer):
    """One k x k filter per input channel; channel count preserved."""
    KIND = "DepthwiseConv2D"

    def __init__(self, channels, kernel_size, stride=1, padding=0, rng=None,
                 dtype=np.float32):
        super().__init__(dtype)
        rng = rng if rng is not None else np.random.default_rng()
        kh = int(kernel_size)
        self.hyper = {"channels": channels, "kernel_size": kh,
                      "stride": int(stride), "padding": int(padding)}
        self.params["w"] = kaiming_uniform(rng, (channels, kh, kh),
                                           fan_in=kh * kh, dtype=self.dtype)

    def forward(self, x, train=False):
        x = np.asarray(x)
        h = self.hyper
        _require(x.ndim == 4 and x.shape[1] == h["channels"],
                 f"{self.KIND}: expected (N,{h['channels']},H,W), got {x.shape}")
        k, s, p = h["kernel_size"], h["stride"], h["padding"]
        _require(k <= x.shape[2] + 2 * p and k <= x.shape[3] + 2 * p,
                 f"{self.KIND}: kernel {k} larger than padded input {x.shape}")
        out_h = (x.shape[2] + 2 * p - k) // s + 1
        out_w = (x.shape[3] + 2 * p - k) // s + 1
        if p:
            x = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        cols = im2col(x, k, k, s, out_h, out_w).reshape(
            x.shape[0], h["channels"], k * k, out_h * out_w)
        w2d = self.params["w"].reshape(h["channels"], k * k)
        out = np.einsum("ck,nckp->ncp", w2d, cols).reshape(
            x.shape[0], h["channels"], out_h, out_w)
        if train:
            self._cache = (cols, x.shape, out_h, out_w)
        return out

    def _backward(self, dout, cache):
        cols, padded_shape, out_h, out_w = cache
        h = self.hyper
        k, s, p = h["kernel_size"], h["stride"], h["padding"]
        dflat = dout.reshape(dout.shape[0], h["channels"], -1)
        self.grads["w"] = np.einsum("ncp,nckp->ck", dflat, cols).reshape(
            self.params["w"].shape)
        w2d = self.params["w"].reshape(h["channels"], k * k)
        dcols = np.einsum("ck,ncp->nckp", w2d, dflat).reshape(
            dout.shape[0], h["channels"] * k * k, -1)
        dx = col2im(dcols, padded_shape, k, k, s, out_h, out_w)
        if p:
            dx = dx[:, :, p:-p, p:-p]
        return dx

    def out_shape(self, shape):
        if len(shape) != 3 or shape[0] != self.hyper["channels"]:
            raise UnresolvedShapeError(f"{self.KIND}: cannot consume shape {shape}")
        k, s, p = (self.hyper["kernel_size"], self.hyper["stride"],
                   self.hyper["padding"])
        return (shape[0], _conv_extent(shape[1], k, s, p),
                _conv_extent(shape[2], k, s, p))

    def macs(self, shape):
        _, out_h, out_w = self.out_shape(shape)
        k = self.hyper["kernel_size"]
        return k * k * shape[0] * out_h * out_w


class PointwiseConv2D(Layer):
    """1x1 convolution: a per-pixel linear map across channels."""
    KIND = "PointwiseConv2D"

    def __init__(self, in_channels, out_channels, rng=None, dtype=np.float32):
        super().__init__(dtype)
        rng = rng if rng is not None else np.random.default_rng()
        self.hyper = {"in_channels": in_channels, "out_channels": out_channels}
        self.params["w"] = kaiming_uniform(rng, (out_channels, in_channels),
                                           fan_in=in_channels, dtype=self.dtype)

    def forward(self, x, train=False):
        x = np.asarray(x)
        h = self.hyper
        _require(x.ndim == 4 and x.shape[1] == h["in_channels"],
                 f"{self.KIND}: expected (N,{h['in_channels']},H,W), got {x.shape}")
        out = np.einsum("fc,nchw->nfhw", self.params["w"], x)
        if train:
            self._cache = (x,)
        return out

    def _backward(self, dout, cache):
        (x,) = cache
        self.grads["w"] = np.einsum("nfhw,nchw->fc", dout, x)
        return np.einsum("fc,nfhw->nchw", self.params["w"], dout)

    def out_shape(self, shape):
        if len(shape) != 3 or shape[0] != self.hyper["in_channels"]:
            raise UnresolvedShapeError(f"{self.KIND}: cannot consume shape {shape}")
        return (self.hyper["out_channels"], shape[1], shape[2])

    def macs(self, shape):
        return shape[0] * self.hyper["out_channels"] * shape[1] * shape[2]


class BatchNorm2D(Layer):
    """Per-channel batch normalization over the (N, H, W) axes."""
    KIND = "BatchNorm2D"

    def __init__(self, channels, eps=1e-5, momentum=0.9, dtype=np.float32):
        super().__init__(dtype)
        self.hyper = {"channels": channels, "eps": float(eps),
                      "momentum": float(momentum)}
        self.params["gamma"] = np.ones(channels, dtype=self.dtype)
        self.params["beta"] = np.zeros(channels, dtype=self.dtype)
        self.buffers["running_mean"] = np.zeros(channels, dtype=self.dtype)
        self.buffers["running_var"] = np.ones(channels, dtype=self.dtype)

    def forward(self, x, train=False):
        x = np.asarray(x)
        c = self.hyper["channels"]
        _require(x.ndim == 4 and x.shape[1] == c,
                 f"{self.KIND}: expected (N,{c},H,W), got {x.shape}")
        eps = self.hyper["eps"]
        if train:
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            m = self.hyper["momentum"]
            self.buffers["running_mean"] = (
                m * self.buffers["running_mean"] + (1 - m) * mean
            ).astype(self.buffers["running_mean"].dtype)
            self.buffers["running_var"] = (
                m * self.buffers["running_var"] + (1 - m) * var
            ).astype(self.buffers["running_var"].dtype)
        else:
            mean = self.buffers["running_mean"]
            var = self.buffers["running_var"]
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        out = (self.params["gamma"][None, :, None, None] * xhat
               + self.params["beta"][None, :, None, None])
        if train:
            self._cache = (xhat, inv_std)
        return out

    def _backward(self, dout, cache):
        xhat, inv_std = cache
        axes = (0, 2, 3)
        m = dout.shape[0] * dout.shape[2] * dout.shape[3]
        self.grads["beta"] = dout.sum(axis=axes)
        self.grads["gamma"] = (dout * xhat).sum(axis=axes)
        dxhat = dout * self.params["gamma"][None, :, None, None]
        sum_dxhat = dxhat.sum(axis=axes, keepdims=True)
        sum_dxhat_xhat = (dxhat * xhat).sum(axis=axes, keepdims=True)
        return (inv_std[None, :, None, None] / m) * (
            m * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)

    def out_shape(self, shape):
        if len(shape) != 3 or shape[0] != self.hyper["channels"]:
            raise UnresolvedShapeError(f"{self.KIND}: cannot consume shape {shape}")
        return tuple(shape)


class ReLU(Layer):
    KIND = "ReLU"

    def forward(self, x, train=False):
        x = np.asarray(x)
        mask = x > 0  # derivative at exactly 0 is 0
        if train:
            self._cache = (mask,)
        return np.where(mask, x, 0.0).astype(x.dtype)

    def _backward(self, dout, cache):
        (mask,) = cache
        return dout * mask


class GlobalAvgPool(Layer):
    """(N, C, H, W) -> (N, C) mean over the spatial grid."""
    KIND = "GlobalAvgPool"

    def forward(self, x, train=False):
        x = np.asarray(x)
        _require(x.ndim == 4, f"{self.KIND}: expected (N,C,H,W), got {x.shape}")
        if train:
            self._cache = (x.shape,)
        return x.mean(axis=(2, 3))

    def _backward(self, dout, cache):
        (shape,) = cache
        n, c, h, w = shape
        return np.broadcast_to(dout[:, :, None, None] / (h * w), shape).copy()

    def out_shape(self, shape):
        if len(shape) != 3:
            raise UnresolvedShapeError(f"{self.KIND}: cannot consume shape {shape}")
        return (shape[0],)


class Dense(Layer):
    KIND = "Dense"

    def __init__(self, in_features, out_features, bias=True, rng=None,
                 dtype=np.float32):
        super().__init__(dtype)
        rng = rng if rng is not None else np.random.default_rng()
        self.hyper = {"in_features": in_features, "out_features": out_features,
                      "bias": bool(bias)}
        self.params["w"] = kaiming_uniform(rng, (in_features, out_features),
                                           fan_in=in_features, dtype=self.dtype)
        if bias:
            self.params["b"] = np.zeros(out_features, dtype=self.dtype)

    def forward(self, x, train=False):
        x = np.asarray(x)
        d = self.hyper["in_features"]
        _require(x.ndim == 2 and x.shape[1] == d,
                 f"{self.KIND}: expected (N,{d}), got {x.shape}")
        out = x @ self.params["w"]
        if "b" in self.params:
            out = out + self.params["b"]
        if train:
            self._cache = (x,)
        return out

    def _backward(self, dout, cache):
        (x,) = cache
        self.grads["w"] = x.T @ dout
        if "b" in self.params:
            self.grads["b"] = dout.sum(axis=0)
        return dout @ self.params["w"].T

    def out_shape(self, shape):
        if len(shape) != 1 or shape[0] != self.hyper["in_features"]:
            raise UnresolvedShapeError(f"{self.KIND}: cannot consume shape {shape}")
        return (self.hyper["out_features"],)

    def macs(self, shape):
        self.out_shape(shape)
        return self.hyper["in_features"] * self.hyper["out_features"]


class Softmax(Layer):
    """Row-wise exp-normalization with max subtraction for stability."""
    KIND = "Softmax"

    def forward(self, x, train=False):
        x = np.asarray(x)
        _require(x.ndim == 2, f"{self.KIND}: expected (N,K), got {x.shape}")
        shifted = x - x.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        probs = e / e.sum(axis=1, keepdims=True)
        if train:
            self._cache = (probs,)
        return probs

    def _backward(self, dout, cache):
        (probs,) = cache
        inner = (dout * probs).sum(axis=1, keepdims=True)
        return probs * (dout - inner)


LAYER_KINDS = {cls.KIND: cls for cls in
               (Conv2D, DepthwiseConv2D, PointwiseConv2D, BatchNorm2D, ReLU,
                GlobalAvgPool, Dense, Softmax)}
