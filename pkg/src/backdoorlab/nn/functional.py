"""Stateless forward/backward kernels for the fixed layer set.

All image tensors are NHWC. Conv weights are laid out (kh, kw, c_in, c_out)
so that an im2col matrix times the reshaped kernel gives the output directly.
Every forward returns ``(output, cache)``; the matching backward consumes the
cache and nothing else from the forward pass.
"""
from dataclasses import dataclass
from itertools import product

import numpy as np

from ..errors import ShapeError


def _pair(v):
    if isinstance(v, (tuple, list)):
        a, b = v
        return int(a), int(b)
    return int(v), int(v)


def conv_output_size(size, kernel, stride, padding):
    return (size + 2 * padding - kernel) // stride + 1


@dataclass
class ConvCache:
    cols: np.ndarray
    input_shape: tuple
    kernel: tuple
    stride: int
    padding: tuple


def _im2col(xp, kh, kw, stride, out_h, out_w):
    n, _, _, c = xp.shape
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    windows = windows[:, :stride * (out_h - 1) + 1:stride, :stride * (out_w - 1) + 1:stride]
    # (n, oh, ow, c, kh, kw) -> rows of (kh, kw, c) patches; reshape copies
    return windows.transpose(0, 1, 2, 4, 5, 3).reshape(n * out_h * out_w, kh * kw * c)


def conv2d_forward(x, weights, bias, stride=1, padding=0, layer=None):
    """Cross-correlate a NHWC batch with ``weights`` (kh, kw, c_in, c_out)."""
    if x.ndim != 4:
        raise ShapeError(f"conv2d expects NHWC input, got shape {x.shape}", layer=layer)
    kh, kw, c_in, c_out = weights.shape
    if x.shape[3] != c_in:
        raise ShapeError(
            f"input has {x.shape[3]} channels but kernel expects {c_in}",
            layer=layer, expected=c_in, got=x.shape[3],
        )
    if bias.shape != (c_out,):
        raise ShapeError(f"bias shape {bias.shape} != ({c_out},)", layer=layer,
                         expected=(c_out,), got=bias.shape)
    ph, pw = _pair(padding)
    n, h, w, _ = x.shape
    out_h = conv_output_size(h, kh, stride, ph)
    out_w = conv_output_size(w, kw, stride, pw)
    if out_h < 1 or out_w < 1:
        raise ShapeError(
            f"kernel {kh}x{kw} does not fit input {h}x{w} with padding {ph},{pw}",
            layer=layer, expected=(kh, kw), got=(h + 2 * ph, w + 2 * pw),
        )
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0))) if ph or pw else x
    cols = _im2col(xp, kh, kw, stride, out_h, out_w)
    out = cols @ weights.reshape(kh * kw * c_in, c_out)
    out += bias
    cache = ConvCache(cols, x.shape, (kh, kw), stride, (ph, pw))
    return out.reshape(n, out_h, out_w, c_out), cache


def conv2d_backward(grad_out, cache, weights, need_input_grad=True):
    """Return ``(grad_input, grad_weights, grad_bias)``.

    ``grad_input`` is ``None`` when ``need_input_grad`` is false, which the
    network uses to skip the col2im scatter for the first layer.
    """
    if cache is None:
        raise ValueError("conv2d_backward called without a forward cache")
    kh, kw, c_in, c_out = weights.shape
    n, h, w, _ = cache.input_shape
    out_shape = (n,
                 conv_output_size(h, kh, cache.stride, cache.padding[0]),
                 conv_output_size(w, kw, cache.stride, cache.padding[1]),
                 c_out)
    if grad_out.shape != out_shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} != forward output {out_shape}",
                         expected=out_shape, got=grad_out.shape)
    go = grad_out.reshape(-1, c_out)
    grad_w = (cache.cols.T @ go).reshape(weights.shape)
    grad_b = go.sum(axis=0)
    if not need_input_grad:
        return None, grad_w, grad_b

    _, out_h, out_w, _ = out_shape
    ph, pw = cache.padding
    s = cache.stride
    if s == 1 and ph < kh and pw < kw:
        # stride 1: the input gradient is a full correlation of grad_out with the flipped kernel
        gp = np.pad(grad_out, ((0, 0), (kh - 1 - ph, kh - 1 - ph), (kw - 1 - pw, kw - 1 - pw), (0, 0)))
        flipped = weights[::-1, ::-1].transpose(0, 1, 3, 2).reshape(kh * kw * c_out, c_in)
        grad_x = _im2col(gp, kh, kw, 1, h, w) @ flipped
        return grad_x.reshape(n, h, w, c_in), grad_w, grad_b
    dcols = (go @ weights.reshape(-1, c_out).T).reshape(n, out_h, out_w, kh, kw, c_in)
    dxp = np.zeros((n, h + 2 * ph, w + 2 * pw, c_in), dtype=grad_out.dtype)
    h_end = s * (out_h - 1) + 1
    w_end = s * (out_w - 1) + 1
    for i in range(kh):
        for j in range(kw):
            dxp[:, i:i + h_end:s, j:j + w_end:s, :] += dcols[:, :, :, i, j, :]
    grad_x = dxp[:, ph:ph + h, pw:pw + w, :]
    return grad_x, grad_w, grad_b


def maxpool_forward(x, kernel=2, stride=2, layer=None):
    """Max over each window; returns ``(output, argmax)``.

    ``argmax`` holds the scan-order position of the winner inside its window
    (row-major over the kernel). Ties keep the first position scanned.
    """
    kh, kw = _pair(kernel)
    n, h, w, c = x.shape
    if kh > h or kw > w:
        raise ShapeError(f"pool kernel {kh}x{kw} larger than input {h}x{w}",
                         layer=layer, expected=(kh, kw), got=(h, w))
    out_h = (h - kh) // stride + 1
    out_w = (w - kw) // stride + 1
    h_end = stride * (out_h - 1) + 1
    w_end = stride * (out_w - 1) + 1
    out = None
    argmax = np.zeros((n, out_h, out_w, c), dtype=np.int16)
    for idx, (i, j) in enumerate(product(range(kh), range(kw))):
        window = x[:, i:i + h_end:stride, j:j + w_end:stride, :]
        if out is None:
            out = window.copy()
            continue
        better = window > out
        np.copyto(out, window, where=better)
        np.copyto(argmax, idx, where=better)
    return out, argmax


def maxpool_backward(grad_out, argmax, input_shape, kernel=2, stride=2):
    kh, kw = _pair(kernel)
    if grad_out.shape != argmax.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} != pooled shape {argmax.shape}",
                         expected=argmax.shape, got=grad_out.shape)
    _, out_h, out_w, _ = argmax.shape
    grad_x = np.zeros(input_shape, dtype=grad_out.dtype)
    h_end = stride * (out_h - 1) + 1
    w_end = stride * (out_w - 1) + 1
    for idx, (i, j) in enumerate(product(range(kh), range(kw))):
        grad_x[:, i:i + h_end:stride, j:j + w_end:stride, :] += grad_out * (argmax == idx)
    return grad_x


@dataclass
class BatchNormState:
    """Running statistics of one batch-norm layer."""

    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.99
    epsilon: float = 1e-3

    @classmethod
    def fresh(cls, channels, momentum=0.99, epsilon=1e-3, dtype=np.float32):
        return cls(np.zeros(channels, dtype=dtype), np.ones(channels, dtype=dtype),
                   momentum, epsilon)


@dataclass
class BatchNormCache:
    xhat: np.ndarray
    inv_std: np.ndarray
    scale: np.ndarray
    mode: str


def batchnorm_forward(x, scale, shift, state, mode="train", layer=None):
    """Normalize per channel (last axis).

    In train mode the batch statistics are used and ``state`` gets new
    running-stat arrays; eval mode reads the running stats only.
    """
    axes = tuple(range(x.ndim - 1))
    if mode == "train":
        if x.shape[0] < 2:
            raise ShapeError("batch norm in train mode needs a batch of at least 2",
                             layer=layer, expected=2, got=x.shape[0])
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        m = state.momentum
        state.running_mean = (m * state.running_mean + (1 - m) * mean).astype(state.running_mean.dtype)
        state.running_var = (m * state.running_var + (1 - m) * var).astype(state.running_var.dtype)
    elif mode == "eval":
        mean = state.running_mean.astype(x.dtype)
        var = state.running_var.astype(x.dtype)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    inv_std = 1.0 / np.sqrt(var + x.dtype.type(state.epsilon))
    xhat = (x - mean) * inv_std
    out = xhat * scale + shift
    return out, BatchNormCache(xhat, inv_std, scale, mode)


def batchnorm_backward(grad_out, cache):
    """Return ``(grad_input, grad_scale, grad_shift)``."""
    axes = tuple(range(grad_out.ndim - 1))
    grad_scale = (grad_out * cache.xhat).sum(axis=axes)
    grad_shift = grad_out.sum(axis=axes)
    dxhat = grad_out * cache.scale
    if cache.mode == "eval":
        return dxhat * cache.inv_std, grad_scale, grad_shift
    m = grad_out.size // grad_out.shape[-1]
    grad_x = (cache.inv_std / m) * (
        m * dxhat - dxhat.sum(axis=axes) - cache.xhat * (dxhat * cache.xhat).sum(axis=axes)
    )
    return grad_x, grad_scale, grad_shift


def dense_forward(x, weights, bias, layer=None):
    if x.ndim != 2 or x.shape[1] != weights.shape[0]:
        raise ShapeError(f"dense expects (batch, {weights.shape[0]}) input, got {x.shape}",
                         layer=layer, expected=weights.shape[0], got=x.shape[-1])
    return x @ weights + bias, x


def dense_backward(grad_out, cached_input, weights):
    return grad_out @ weights.T, cached_input.T @ grad_out, grad_out.sum(axis=0)


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(grad_out, mask):
    return grad_out * mask


def dropout_forward(x, rate, rng=None, mode="train"):
    """Inverted dropout: kept units are scaled by ``1/(1-rate)`` at train time."""
    if mode == "eval" or rate == 0:
        return x, None
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    keep = rng.random(x.shape) >= rate
    mask = keep.astype(x.dtype) / x.dtype.type(1.0 - rate)
    return x * mask, mask


def dropout_backward(grad_out, mask):
    return grad_out if mask is None else grad_out * mask


def flatten_forward(x):
    return x.reshape(x.shape[0], -1), x.shape


def flatten_backward(grad_out, input_shape):
    return grad_out.reshape(input_shape)


def softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of softmax(logits) and integer labels.

    Returns ``(loss, grad_logits)`` where the gradient is already divided by
    the batch size.
    """
    labels = np.asarray(labels)
    n, c = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} != ({n},)", expected=(n,), got=labels.shape)
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        bad = labels[(labels < 0) | (labels >= c)][0]
        raise ValueError(f"label {bad} out of range [0, {c})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    denom = e.sum(axis=1, keepdims=True)
    rows = np.arange(n)
    log_probs = shifted[rows, labels] - np.log(denom[:, 0])
    loss = -float(log_probs.mean())
    grad = e / denom
    grad[rows, labels] -= 1
    grad /= n
    return loss, grad
