"""Dense numeric primitives that everything else builds on.

Conventions, used consistently across the engine:

* a tensor is a C-contiguous ``numpy.float32`` array; construction goes
  through :func:`tensor`, which rejects NaN/Inf,
* matrix products accumulate in float64 (via ``einsum`` so the summation
  order is fixed) and round to float32 once at the end,
* ``mlp`` means two linear layers with a ReLU between them; the hidden
  width is twice the output width,
* layer normalization standardizes each row with epsilon 1e-5, so a
  zero-variance row maps to the bias vector,
* no implicit broadcasting: shapes are checked up front and mismatches
  raise :class:`~hoirel.errors.ShapeError`.
"""

import numpy as np

from .errors import ShapeError, ValidationError

LN_EPS = 1e-5
MLP_HIDDEN_FACTOR = 2

_MODULE = "kernels"


def tensor(values, shape=None) -> np.ndarray:
    """Build a float32 row-major tensor, rejecting non-finite values."""
    try:
        arr = np.asarray(values, dtype=np.float32)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"cannot build tensor: {exc}", module=_MODULE) from exc
    if shape is not None:
        expected = int(np.prod(shape)) if len(shape) else 1
        if arr.size != expected:
            raise ShapeError(
                f"cannot reshape {arr.size} values to {tuple(shape)}", module=_MODULE
            )
        arr = arr.reshape(shape)
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if arr.size and not np.isfinite(arr).all():
        raise ValidationError("tensor contains NaN or Inf", module=_MODULE)
    return arr


def _matrix(x, name="input") -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 2:
        raise ShapeError(f"{name} must be 2-d, got shape {x.shape}", module=_MODULE)
    return x


def _vector(x, n, name="vector") -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    if x.shape != (n,):
        raise ShapeError(f"{name} must have shape ({n},), got {x.shape}", module=_MODULE)
    return x


def matmul(a, b) -> np.ndarray:
    """Row-major matrix product, accumulated in float64."""
    a = _matrix(a, "a")
    b = _matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims disagree: {a.shape} x {b.shape}", module=_MODULE)
    out = np.einsum("ik,kj->ij", a.astype(np.float64), b.astype(np.float64))
    return out.astype(np.float32)


def softmax_rows(x) -> np.ndarray:
    """Per-row softmax with max subtraction; rows sum to 1."""
    x = _matrix(x)
    if x.shape[1] == 0 and x.shape[0] > 0:
        raise ShapeError("softmax over zero columns", module=_MODULE)
    x64 = x.astype(np.float64)
    if x.shape[0]:
        x64 = x64 - x64.max(axis=1, keepdims=True)
    e = np.exp(x64)
    return (e / e.sum(axis=1, keepdims=True) if x.shape[0] else e).astype(np.float32)


def layer_norm(x, gain, bias, eps=LN_EPS) -> np.ndarray:
    """Standardize each row (population variance), then apply gain and bias.

    A zero-variance row standardizes to zero, so the output is the bias
    vector; epsilon keeps the division finite.
    """
    x = _matrix(x)
    n = x.shape[1]
    if n < 2:
        raise ShapeError(f"layer_norm needs at least 2 columns, got {n}", module=_MODULE)
    gain = _vector(gain, n, "gain")
    bias = _vector(bias, n, "bias")
    x64 = x.astype(np.float64)
    mu = x64.mean(axis=1, keepdims=True)
    var = ((x64 - mu) ** 2).mean(axis=1, keepdims=True)
    y = (x64 - mu) / np.sqrt(var + eps)
    return (y * gain.astype(np.float64) + bias.astype(np.float64)).astype(np.float32)


def linear(x, weight, bias) -> np.ndarray:
    """Affine map ``x @ weight + bias`` with float64 accumulation."""
    x = _matrix(x, "x")
    weight = _matrix(weight, "weight")
    if x.shape[1] != weight.shape[0]:
        raise ShapeError(
            f"linear input width {x.shape[1]} != weight rows {weight.shape[0]}",
            module=_MODULE,
        )
    bias = _vector(bias, weight.shape[1], "bias")
    out = np.einsum("ik,kj->ij", x.astype(np.float64), weight.astype(np.float64))
    return (out + bias.astype(np.float64)).astype(np.float32)


def relu(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float32), np.float32(0.0))


def mlp(x, layers) -> np.ndarray:
    """Apply (weight, bias) layers with ReLU between all but the last."""
    layers = list(layers)
    if not layers:
        raise ShapeError("mlp needs at least one layer", module=_MODULE)
    for weight, bias in layers[:-1]:
        x = relu(linear(x, weight, bias))
    weight, bias = layers[-1]
    return linear(x, weight, bias)


def mlp_dims(n_in: int, n_out: int):
    """Weight shapes for the engine's two-layer MLP convention."""
    hidden = MLP_HIDDEN_FACTOR * n_out
    return [((n_in, hidden), (hidden,)), ((hidden, n_out), (n_out,))]


def sigmoid(x) -> np.ndarray:
    x64 = np.asarray(x, dtype=np.float32).astype(np.float64)
    return (1.0 / (1.0 + np.exp(-x64))).astype(np.float32)
