"""Primitive layers as paired forward/backward functions on [T x d] arrays.

Every forward returns (output, cache); the matching backward consumes the
upstream gradient plus the cache and returns input/parameter gradients.
Everything runs in float64; reverse-mode formulas are exact, which the
finite-difference suite verifies.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def linear_fwd(x, W, b):
    return x @ W + b, (x, W)


def linear_bwd(dy, cache):
    x, W = cache
    return dy @ W.T, x.T @ dy, dy.sum(axis=0)


def layer_norm_fwd(x, gain, shift, eps):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    return gain * xhat + shift, (xhat, inv, gain)


def layer_norm_bwd(dy, cache):
    xhat, inv, gain = cache
    d = xhat.shape[-1]
    dxhat = dy * gain
    dx = (inv / d) * (d * dxhat
                      - dxhat.sum(axis=-1, keepdims=True)
                      - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
    return dx, (dy * xhat).sum(axis=0), dy.sum(axis=0)


def swish_fwd(x):
    s = sigmoid(x)
    return x * s, (x, s)


def swish_bwd(dy, cache):
    x, s = cache
    return dy * (s * (1.0 + x * (1.0 - s)))


def glu_fwd(h):
    """Gated linear unit over a channel-doubled input: a * sigmoid(b)."""
    d = h.shape[-1] // 2
    a, b = h[..., :d], h[..., d:]
    s = sigmoid(b)
    return a * s, (a, s)


def glu_bwd(dy, cache):
    a, s = cache
    return np.concatenate([dy * s, dy * a * s * (1.0 - s)], axis=-1)


def dropout_fwd(x, rate, training, rng):
    if not training or rate <= 0.0:
        return x, None
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep) / keep
    return x * mask, mask


def dropout_bwd(dy, mask):
    if mask is None:
        return dy
    return dy * mask


def depthwise_conv_fwd(x, kernel):
    """Per-channel 1-D convolution with same padding; kernel is [k x d]."""
    k, d = kernel.shape
    pad = (k - 1) // 2
    xp = np.pad(x, ((pad, pad), (0, 0)))
    win = sliding_window_view(xp, k, axis=0)          # [T, d, k]
    y = np.einsum("tck,kc->tc", win, kernel)
    return y, (win, kernel, x.shape[0])


def depthwise_conv_bwd(dy, cache):
    win, kernel, T = cache
    k, d = kernel.shape
    pad = (k - 1) // 2
    dkernel = np.einsum("tc,tck->kc", dy, win)
    dyp = np.pad(dy, ((k - 1, k - 1), (0, 0)))
    dwin = sliding_window_view(dyp, k, axis=0)        # [T + k - 1, d, k]
    dxpad = np.einsum("tck,kc->tc", dwin, kernel[::-1])
    return dxpad[pad:pad + T], dkernel


def batch_norm_fwd(x, gain, shift, running_mean, running_var, momentum, eps, training):
    """Per-channel normalization over the time axis.

    Training mode uses (and updates, in place) the running statistics with
    the batch's biased moments; eval mode normalizes with the stored ones.
    """
    if training:
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mu, var = running_mean, running_var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    return gain * xhat + shift, (xhat, inv, gain, training)


def batch_norm_bwd(dy, cache):
    xhat, inv, gain, training = cache
    T = xhat.shape[0]
    dgain = (dy * xhat).sum(axis=0)
    dshift = dy.sum(axis=0)
    dxhat = dy * gain
    if training:
        dx = (inv / T) * (T * dxhat
                          - dxhat.sum(axis=0)
                          - xhat * (dxhat * xhat).sum(axis=0))
    else:
        dx = dxhat * inv
    return dx, dgain, dshift


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax_rows(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax_bwd(dprobs, probs):
    """Gradient through row-wise softmax given dL/dprobs."""
    inner = (dprobs * probs).sum(axis=-1, keepdims=True)
    return probs * (dprobs - inner)
