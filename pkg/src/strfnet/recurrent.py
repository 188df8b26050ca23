"""Stacked bidirectional GRU with exact backpropagation through time.

Gate layout packs (update z, reset r, candidate n) into one weight block
per source, so a layer direction has three parameters: W (input
projections), U (recurrent projections) and b (gate biases). States
start at zero. Update rule:

    z_t = sigmoid(x_t Wz + h_{t-1} Uz + bz)
    r_t = sigmoid(x_t Wr + h_{t-1} Ur + br)
    n_t = tanh(x_t Wn + (r_t * h_{t-1}) Un + bn)
    h_t = (1 - z_t) * n_t + z_t * h_{t-1}

With zero input, zero biases and zero initial state every gate sits at
its fixed point and the output stays exactly zero.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def gru_direction_forward(x: np.ndarray, w: np.ndarray, u: np.ndarray, b: np.ndarray):
    """One direction over (batch, frames, dim). Returns (states, cache)."""
    bsz, t_len, _ = x.shape
    hidden = u.shape[0]
    xw = x @ w + b  # (B, T, 3h), input projections hoisted out of the loop
    h = np.zeros((bsz, hidden))
    zs = np.empty((bsz, t_len, hidden))
    rs = np.empty_like(zs)
    ns = np.empty_like(zs)
    hs = np.empty_like(zs)
    uz, ur, un = u[:, :hidden], u[:, hidden : 2 * hidden], u[:, 2 * hidden :]
    for t in range(t_len):
        z = _sigmoid(xw[:, t, :hidden] + h @ uz)
        r = _sigmoid(xw[:, t, hidden : 2 * hidden] + h @ ur)
        n = np.tanh(xw[:, t, 2 * hidden :] + (r * h) @ un)
        zs[:, t], rs[:, t], ns[:, t] = z, r, n
        h = (1.0 - z) * n + z * h
        hs[:, t] = h
    cache = (x, w, u, zs, rs, ns, hs)
    return hs, cache


def gru_direction_backward(gh_out: np.ndarray, cache):
    """Backward through time; gh_out is dLoss/dstates, shape (B, T, h)."""
    x, w, u, zs, rs, ns, hs = cache
    bsz, t_len, hidden = gh_out.shape
    uz, ur, un = u[:, :hidden], u[:, hidden : 2 * hidden], u[:, 2 * hidden :]
    gxw = np.zeros((bsz, t_len, 3 * hidden))
    gu = np.zeros_like(u)
    gh = np.zeros((bsz, hidden))
    for t in range(t_len - 1, -1, -1):
        gh = gh + gh_out[:, t]
        z, r, n = zs[:, t], rs[:, t], ns[:, t]
        h_prev = hs[:, t - 1] if t > 0 else np.zeros((bsz, hidden))
        gz = gh * (h_prev - n) * z * (1.0 - z)
        gn = gh * (1.0 - z)
        gh_prev = gh * z
        gan = gn * (1.0 - n ** 2)
        grh = gan @ un.T
        gr = grh * h_prev
        gh_prev = gh_prev + grh * r
        gar = gr * r * (1.0 - r)
        gaz = gz
        gu[:, 2 * hidden :] += (r * h_prev).T @ gan
        gu[:, hidden : 2 * hidden] += h_prev.T @ gar
        gu[:, :hidden] += h_prev.T @ gaz
        gh_prev = gh_prev + gaz @ uz.T + gar @ ur.T
        gxw[:, t, :hidden] = gaz
        gxw[:, t, hidden : 2 * hidden] = gar
        gxw[:, t, 2 * hidden :] = gan
        gh = gh_prev
    gx = gxw @ w.T
    flat_x = x.reshape(-1, x.shape[-1])
    flat_g = gxw.reshape(-1, 3 * hidden)
    gw = flat_x.T @ flat_g
    gb = flat_g.sum(axis=0)
    return gx, gw, gu, gb


def bigru_forward(x: np.ndarray, layer_params: list[dict]):
    """Stacked bidirectional GRU.

    layer_params: one dict per layer with keys fwd_w, fwd_u, fwd_b,
    bwd_w, bwd_u, bwd_b. Output is (batch, frames, 2*hidden) from the
    last layer; deeper layers consume the concatenated outputs below.
    """
    caches = []
    out = x
    for lp in layer_params:
        fwd, fwd_cache = gru_direction_forward(out, lp["fwd_w"], lp["fwd_u"], lp["fwd_b"])
        rev_in = out[:, ::-1, :]
        bwd, bwd_cache = gru_direction_forward(rev_in, lp["bwd_w"], lp["bwd_u"], lp["bwd_b"])
        out = np.concatenate([fwd, bwd[:, ::-1, :]], axis=2)
        caches.append((fwd_cache, bwd_cache))
    return out, caches


def bigru_backward(gy: np.ndarray, caches) -> tuple[np.ndarray, list[dict]]:
    """Returns (grad_input, per-layer gradient dicts matching layer_params)."""
    grads: list[dict] = [None] * len(caches)
    g = gy
    for li in range(len(caches) - 1, -1, -1):
        fwd_cache, bwd_cache = caches[li]
        hidden = g.shape[2] // 2
        g_fwd = g[:, :, :hidden]
        g_bwd = g[:, ::-1, hidden:]
        gx_f, gw_f, gu_f, gb_f = gru_direction_backward(np.ascontiguousarray(g_fwd), fwd_cache)
        gx_b, gw_b, gu_b, gb_b = gru_direction_backward(np.ascontiguousarray(g_bwd), bwd_cache)
        grads[li] = {"fwd_w": gw_f, "fwd_u": gu_f, "fwd_b": gb_f,
                     "bwd_w": gw_b, "bwd_u": gu_b, "bwd_b": gb_b}
        g = gx_f + gx_b[:, ::-1, :]
    return g, grads


def init_gru_layer(input_dim: int, hidden: int, rng: np.random.Generator) -> dict:
    """Uniform(-1/sqrt(h), 1/sqrt(h)) init for every weight, zero biases."""
    bound = 1.0 / np.sqrt(hidden)
    def draw(shape):
        return rng.uniform(-bound, bound, size=shape)
    return {
        "fwd_w": draw((input_dim, 3 * hidden)), "fwd_u": draw((hidden, 3 * hidden)),
        "fwd_b": np.zeros(3 * hidden),
        "bwd_w": draw((input_dim, 3 * hidden)), "bwd_u": draw((hidden, 3 * hidden)),
        "bwd_b": np.zeros(3 * hidden),
    }
