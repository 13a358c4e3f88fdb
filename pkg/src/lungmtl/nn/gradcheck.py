"""Central finite-difference utilities for verifying analytic gradients."""

import numpy as np


def numerical_gradient(f, x, h=1e-5):
    """Central differences of a scalar function, elementwise over x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        out[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(a, b):
    """Norm-based relative disagreement between two gradient arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def check_input_gradient(layer, x, rng, h=1e-5):
    """Relative error of d(sum(out*dout))/dx against finite differences."""
    x = np.asarray(x, dtype=np.float64)
    out = layer.forward(x, train=True)
    dout = rng.standard_normal(out.shape)
    dx = layer.backward(dout)

    def objective(xv):
        return float(np.sum(layer.forward(xv, train=True) * dout))

    layer._cache = None  # FD forwards leave an unconsumed cache behind
    return relative_error(dx, numerical_gradient(objective, x, h))


def check_param_gradients(layer, x, rng, h=1e-5):
    """Max relative error over the layer's parameters, FD vs analytic."""
    x = np.asarray(x, dtype=np.float64)
    out = layer.forward(x, train=True)
    dout = rng.standard_normal(out.shape)
    layer.backward(dout)
    analytic = {k: layer.grads[k].copy() for k in layer.params}

    worst = 0.0
    for key, param in layer.params.items():
        def objective(_pv):
            return float(np.sum(layer.forward(x, train=True) * dout))

        grad = np.zeros_like(param, dtype=np.float64)
        flat = param.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = objective(None)
            flat[i] = orig - h
            fm = objective(None)
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        worst = max(worst, relative_error(analytic[key], grad))
    layer._cache = None
    return worst
