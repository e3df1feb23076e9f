"""Differentiable layers, activations and losses."""

import numpy as np

from emostyle.autograd.tensor import Tensor
from emostyle.errors import BadLabel, ShapeMismatch


def _pair(v):
    return (v, v) if isinstance(v, int) else tuple(v)


def dense(x, W, b=None):
    if x.ndim != 2 or W.ndim != 2 or x.shape[1] != W.shape[0]:
        raise ShapeMismatch(f"dense: input {x.shape} does not match weight {W.shape}")
    if b is not None and b.shape != (W.shape[1],):
        raise ShapeMismatch(f"dense: bias {b.shape} does not match weight {W.shape}")
    out = x @ W
    return out if b is None else out + b


# convolution kernels on raw arrays ----------------------------------------
def _windows(xp, kh, kw, sh, sw, ho, wo):
    # (B, C, ho, wo, kh, kw) strided view
    view = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return view[:, :, : sh * (ho - 1) + 1 : sh, : sw * (wo - 1) + 1 : sw]


def _conv_out_size(h, w, kh, kw, stride, padding):
    (sh, sw), (ph, pw) = stride, padding
    return (h + 2 * ph - kh) // sh + 1, (w + 2 * pw - kw) // sw + 1


def _conv_forward(x, K, stride, padding):
    (ph, pw), (sh, sw) = padding, stride
    kh, kw = K.shape[2:]
    ho, wo = _conv_out_size(x.shape[2], x.shape[3], kh, kw, stride, padding)
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols = _windows(xp, kh, kw, sh, sw, ho, wo)
    out = np.tensordot(cols, K, axes=([1, 4, 5], [1, 2, 3]))  # B, ho, wo, Cout
    return out.transpose(0, 3, 1, 2)


def _conv_input_grad(g, K, stride, padding, in_hw):
    """Adjoint of :func:`_conv_forward` with respect to its input."""
    (ph, pw), (sh, sw) = padding, stride
    kh, kw = K.shape[2:]
    B, _, ho, wo = g.shape
    h, w = in_hw
    dcols = np.tensordot(g, K, axes=([1], [0]))  # B, ho, wo, Cin, kh, kw
    dcols = dcols.transpose(0, 3, 1, 2, 4, 5)
    hp = max(h + 2 * ph, sh * (ho - 1) + kh)
    wp = max(w + 2 * pw, sw * (wo - 1) + kw)
    dxp = np.zeros((B, K.shape[1], hp, wp), dtype=g.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + sh * (ho - 1) + 1 : sh, j : j + sw * (wo - 1) + 1 : sw] += dcols[..., i, j]
    return dxp[:, :, ph : ph + h, pw : pw + w]


def _conv_kernel_grad(x, g, kshape, stride, padding):
    (ph, pw), (sh, sw) = padding, stride
    kh, kw = kshape[2:]
    ho, wo = g.shape[2:]
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols = _windows(xp, kh, kw, sh, sw, ho, wo)
    return np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))  # Cout, Cin, kh, kw


def conv2d(x, K, b=None, stride=1, padding=0):
    """Zero-padded cross-correlation. ``x``: [B, Cin, H, W], ``K``: [Cout, Cin, kh, kw]."""
    stride, padding = _pair(stride), _pair(padding)
    if x.ndim != 4 or K.ndim != 4 or x.shape[1] != K.shape[1]:
        raise ShapeMismatch(f"conv2d: input {x.shape} incompatible with kernel {K.shape}")
    kh, kw = K.shape[2:]
    if kh > x.shape[2] + 2 * padding[0] or kw > x.shape[3] + 2 * padding[1]:
        raise ShapeMismatch(f"conv2d: kernel {K.shape[2:]} larger than padded input {x.shape[2:]}")
    in_hw = x.shape[2:]

    def backward(g):
        gx = _conv_input_grad(g, K.data, stride, padding, in_hw) if x.requires_grad else None
        gk = _conv_kernel_grad(x.data, g, K.shape, stride, padding) if K.requires_grad else None
        return gx, gk

    out = Tensor._make(_conv_forward(x.data, K.data, stride, padding), (x, K), backward, "conv2d")
    if b is not None:
        out = out + b.reshape(1, -1, 1, 1)
    return out


def conv2d_transpose(x, K, b=None, stride=1, padding=0):
    """Adjoint of :func:`conv2d` for the same kernel.

    ``x``: [B, C, H, W] with ``C = K.shape[0]``; output has ``K.shape[1]``
    channels and spatial size ``(H - 1) * stride - 2 * padding + k``.
    """
    stride, padding = _pair(stride), _pair(padding)
    if x.ndim != 4 or K.ndim != 4 or x.shape[1] != K.shape[0]:
        raise ShapeMismatch(f"conv2d_transpose: input {x.shape} incompatible with kernel {K.shape}")
    kh, kw = K.shape[2:]
    out_hw = tuple((n - 1) * s - 2 * p + k for n, s, p, k in zip(x.shape[2:], stride, padding, (kh, kw)))
    if min(out_hw) < 1:
        raise ShapeMismatch(f"conv2d_transpose: empty output {out_hw}")

    def backward(g):
        gx = _conv_forward(g, K.data, stride, padding) if x.requires_grad else None
        gk = _conv_kernel_grad(g, x.data, K.shape, stride, padding) if K.requires_grad else None
        return gx, gk

    data = _conv_input_grad(x.data, K.data, stride, padding, out_hw)
    out = Tensor._make(np.ascontiguousarray(data), (x, K), backward, "conv2d_transpose")
    if b is not None:
        out = out + b.reshape(1, -1, 1, 1)
    return out


# activations ----------------------------------------------------------------
def relu(x):
    mask = x.data > 0
    return Tensor._make(x.data * mask, (x,), lambda g: (g * mask,), "relu")


def leaky_relu(x, alpha=0.2):
    slope = np.where(x.data > 0, 1.0, alpha).astype(x.dtype)
    return Tensor._make(x.data * slope, (x,), lambda g: (g * slope,), "leaky_relu")


def tanh(x):
    y = np.tanh(x.data)
    return Tensor._make(y, (x,), lambda g: (g * (1 - y * y),), "tanh")


def sigmoid(x):
    y = 1.0 / (1.0 + np.exp(-x.data))
    return Tensor._make(y, (x,), lambda g: (g * y * (1 - y),), "sigmoid")


def sqrt(x):
    y = np.sqrt(x.data)
    return Tensor._make(y, (x,), lambda g: (g * 0.5 / y,), "sqrt")


def log_softmax(x, axis=-1):
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - lse
    p = np.exp(y)

    def backward(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return Tensor._make(y, (x,), backward, "log_softmax")


def softmax(x, axis=-1):
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return Tensor._make(y, (x,), backward, "softmax")


def concat(tensors, axis=0):
    tensors = list(tensors)
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor._make(data, tuple(tensors), backward, "concat")


def instance_norm(x, gamma=None, beta=None, eps=1e-5):
    """Standardise each (batch, channel) map over its spatial positions."""
    if x.ndim != 4:
        raise ShapeMismatch(f"instance_norm expects [B, C, H, W], got {x.shape}")
    n = x.shape[2] * x.shape[3]
    if n < 2:
        raise ShapeMismatch("instance_norm needs at least two spatial positions")
    mu = x.data.mean(axis=(2, 3), keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=(2, 3), keepdims=True) + eps)
    xhat = centered * inv_std

    def backward(g):
        gsum = g.sum(axis=(2, 3), keepdims=True)
        gx = inv_std / n * (n * g - gsum - xhat * (g * xhat).sum(axis=(2, 3), keepdims=True))
        return (gx,)

    out = Tensor._make(xhat.astype(x.dtype), (x,), backward, "instance_norm")
    if gamma is not None:
        out = out * gamma.reshape(1, -1, 1, 1)
    if beta is not None:
        out = out + beta.reshape(1, -1, 1, 1)
    return out


# losses ---------------------------------------------------------------------
def cross_entropy(logits, labels):
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeMismatch(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    n_classes = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes or not np.issubdtype(labels.dtype, np.integer)):
        raise BadLabel(f"labels must be integers in [0, {n_classes})")
    logp = log_softmax(logits, axis=1)
    picked = logp[np.arange(labels.size), labels]
    return -picked.mean()


def mse(a, b):
    d = a - b
    return (d * d).mean()
