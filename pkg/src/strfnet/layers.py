"""Neural-network building blocks with hand-written backward passes.

All layers are pure functions in float64: forward returns (output,
cache), backward takes (grad_out, cache) and returns gradients for every
input and parameter. Tensors are batch-first; convolutional features are
laid out (batch, time, band, channel).
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sfft

# im2col is fastest for small kernels; FFT wins for the large first-layer
# kernels (50x15). The switch depends only on shapes, so repeated calls
# with equal shapes take the same path and stay bit-reproducible.
_FFT_KERNEL_AREA = 128


def same_valid_padding(kh: int, kw: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """'Same' along the time axis, 'valid' along the band axis."""
    return ((kh - 1) // 2, kh // 2), (0, 0)


def same_same_padding(kh: int, kw: int) -> tuple[tuple[int, int], tuple[int, int]]:
    return ((kh - 1) // 2, kh // 2), ((kw - 1) // 2, kw // 2)


def _conv_windows(xp: np.ndarray, kh: int, kw: int, stride) -> np.ndarray:
    b, hp, wp, c = xp.shape
    sh, sw = stride
    ho = (hp - kh) // sh + 1
    wo = (wp - kw) // sw + 1
    s0, s1, s2, s3 = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp, shape=(b, ho, wo, kh, kw, c),
        strides=(s0, s1 * sh, s2 * sw, s1, s2, s3), writeable=False)


def conv2d_forward(x: np.ndarray, w: np.ndarray, stride=(1, 1),
                   padding=((0, 0), (0, 0))) -> tuple[np.ndarray, tuple]:
    """Valid cross-correlation after explicit padding, with stride.

    x: (batch, H, W, c_in); w: (kh, kw, c_in, c_out).
    """
    if x.ndim != 4 or w.ndim != 4 or x.shape[3] != w.shape[2]:
        raise ValueError(f"incompatible conv shapes {x.shape} and {w.shape}")
    kh, kw = w.shape[:2]
    xp = np.pad(x, ((0, 0), padding[0], padding[1], (0, 0)))
    if xp.shape[1] < kh or xp.shape[2] < kw:
        raise ValueError("kernel larger than padded input")
    if kh * kw < _FFT_KERNEL_AREA:
        windows = _conv_windows(xp, kh, kw, stride)
        y = np.tensordot(windows, w, axes=([3, 4, 5], [0, 1, 2]))
    else:
        y = _fft_corr_forward(xp, w, stride)
    cache = (xp, w, stride, padding, x.shape)
    return y, cache


def conv2d_backward(gy: np.ndarray, cache: tuple) -> tuple[np.ndarray, np.ndarray]:
    """Returns (grad_input, grad_kernel)."""
    xp, w, stride, padding, x_shape = cache
    kh, kw = w.shape[:2]
    sh, sw = stride
    ho, wo = gy.shape[1], gy.shape[2]
    if kh * kw < _FFT_KERNEL_AREA:
        windows = _conv_windows(xp, kh, kw, stride)
        gw = np.tensordot(windows, gy, axes=([0, 1, 2], [0, 1, 2]))
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, i : i + sh * ho : sh, j : j + sw * wo : sw, :] += gy @ w[i, j].T
    else:
        gxp, gw = _fft_corr_backward(gy, xp, w, stride)
    (pt0, _), (pf0, _) = padding
    gx = gxp[:, pt0 : pt0 + x_shape[1], pf0 : pf0 + x_shape[2], :]
    return gx, gw


def _fft_corr_forward(xp, w, stride):
    kh, kw = w.shape[:2]
    sh, sw = stride
    hp, wp = xp.shape[1], xp.shape[2]
    l1, l2 = sfft.next_fast_len(hp), sfft.next_fast_len(wp)
    xf = np.fft.rfft2(xp, s=(l1, l2), axes=(1, 2))
    wf = np.fft.rfft2(w, s=(l1, l2), axes=(0, 1))
    yf = np.einsum("bhwc,hwco->bhwo", xf, np.conj(wf))
    y_full = np.fft.irfft2(yf, s=(l1, l2), axes=(1, 2))
    return y_full[:, : hp - kh + 1 : sh, : wp - kw + 1 : sw, :]


def _fft_corr_backward(gy, xp, w, stride):
    kh, kw = w.shape[:2]
    sh, sw = stride
    hp, wp = xp.shape[1], xp.shape[2]
    gy_up = np.zeros((gy.shape[0], hp - kh + 1, wp - kw + 1, gy.shape[3]))
    gy_up[:, ::sh, ::sw, :] = gy
    l1, l2 = sfft.next_fast_len(hp), sfft.next_fast_len(wp)
    xf = np.fft.rfft2(xp, s=(l1, l2), axes=(1, 2))
    gf = np.fft.rfft2(gy_up, s=(l1, l2), axes=(1, 2))
    wf = np.fft.rfft2(w, s=(l1, l2), axes=(0, 1))
    gw = np.fft.irfft2(np.einsum("bhwo,bhwc->hwco", np.conj(gf), xf),
                       s=(l1, l2), axes=(0, 1))[:kh, :kw]
    gxp = np.fft.irfft2(np.einsum("bhwo,hwco->bhwc", gf, wf),
                        s=(l1, l2), axes=(1, 2))[:, :hp, :wp]
    return gxp, gw


def batchnorm_forward(x, gamma, beta, running_mean, running_var, train: bool,
                      momentum: float = 0.9, eps: float = 1e-5):
    """Channel-wise normalization over (batch, time, band).

    Training uses batch statistics and returns updated running averages;
    evaluation uses the stored running averages unchanged.
    """
    axes = tuple(range(x.ndim - 1))
    if train:
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        new_mean = momentum * running_mean + (1 - momentum) * mean
        new_var = momentum * running_var + (1 - momentum) * var
    else:
        mean, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    y = gamma * xhat + beta
    cache = (xhat, inv_std, gamma, train, axes)
    return y, cache, new_mean, new_var


def batchnorm_backward(gy, cache):
    xhat, inv_std, gamma, train, axes = cache
    ggamma = (gy * xhat).sum(axis=axes)
    gbeta = gy.sum(axis=axes)
    gxhat = gy * gamma
    if train:
        n = xhat.size // xhat.shape[-1]
        gx = (inv_std / n) * (n * gxhat - gxhat.sum(axis=axes)
                              - xhat * (gxhat * xhat).sum(axis=axes))
    else:
        gx = gxhat * inv_std
    return gx, ggamma, gbeta


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(gy, mask):
    return gy * mask


def dense_forward(x, w, b):
    return x @ w + b, (x, w)


def dense_backward(gy, cache):
    x, w = cache
    gx = gy @ w.T
    flat_x = x.reshape(-1, x.shape[-1])
    flat_g = gy.reshape(-1, gy.shape[-1])
    gw = flat_x.T @ flat_g
    gb = flat_g.sum(axis=0)
    return gx, gw, gb


def attention_pool_forward(x, w, b, v):
    """Self-attentive pooling of (batch, frames, dim) into (batch, dim).

    Per-frame scores v . tanh(x W + b) pass through a softmax over
    frames; the output is the score-weighted average of the frames.
    """
    e = np.tanh(x @ w + b)                     # (B, T, a)
    s = e @ v                                  # (B, T)
    s_shift = s - s.max(axis=1, keepdims=True)
    expo = np.exp(s_shift)
    alpha = expo / expo.sum(axis=1, keepdims=True)
    out = np.einsum("bt,btd->bd", alpha, x)
    cache = (x, w, v, e, alpha)
    return out, cache


def attention_pool_backward(gy, cache):
    x, w, v, e, alpha = cache
    galpha = np.einsum("bd,btd->bt", gy, x)
    gx = alpha[:, :, None] * gy[:, None, :]
    gs = alpha * (galpha - (alpha * galpha).sum(axis=1, keepdims=True))
    gv = np.einsum("bta,bt->a", e, gs)
    ge = gs[:, :, None] * v
    gpre = ge * (1.0 - e ** 2)
    gw = np.einsum("btd,bta->da", x, gpre)
    gb = gpre.sum(axis=(0, 1))
    gx += gpre @ w.T
    return gx, gw, gb, gv


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    expo = np.exp(z)
    return expo / expo.sum(axis=-1, keepdims=True)


def cross_entropy_forward(logits, labels):
    """Mean negative log-likelihood of integer labels under the softmax."""
    z = logits - logits.max(axis=-1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    n = logits.shape[0]
    loss = -float(log_probs[np.arange(n), labels].mean())
    probs = np.exp(log_probs)
    return loss, probs, (probs, labels)


def cross_entropy_backward(cache):
    probs, labels = cache
    n = probs.shape[0]
    g = probs.copy()
    g[np.arange(n), labels] -= 1.0
    return g / n
