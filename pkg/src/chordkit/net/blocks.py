"""Conformer building blocks with exact reverse-mode gradients.

Module functions return the sub-module output *before* any residual scaling;
conformer_block applies the half-step residuals and the closing layer norm.
Backwards accumulate parameter gradients into params.grads and return the
gradient with respect to the module input.
"""

from __future__ import annotations

import numpy as np

from .config import ModelConfig
from .params import ModelParams
from . import functional as f


def _ln_fwd(params, name, x, eps):
    return f.layer_norm_fwd(x, params.tensors[name + ".g"], params.tensors[name + ".b"], eps)


def _ln_bwd(params, name, dy, cache):
    dx, dg, db = f.layer_norm_bwd(dy, cache)
    params.grads[name + ".g"] += dg
    params.grads[name + ".b"] += db
    return dx


def feed_forward_fwd(params: ModelParams, prefix: str, x: np.ndarray,
                     training: bool, rng) -> tuple[np.ndarray, dict]:
    """Pre-norm two-layer transform: LN, expand, swish, dropout, project, dropout."""
    cfg = params.config
    t = params.tensors
    h, ln_cache = _ln_fwd(params, prefix + ".ln", x, cfg.eps)
    a1, lin1_cache = f.linear_fwd(h, t[prefix + ".W1"], t[prefix + ".b1"])
    s1, swish_cache = f.swish_fwd(a1)
    d1, mask1 = f.dropout_fwd(s1, cfg.dropout_rate, training, rng)
    a2, lin2_cache = f.linear_fwd(d1, t[prefix + ".W2"], t[prefix + ".b2"])
    y, mask2 = f.dropout_fwd(a2, cfg.dropout_rate, training, rng)
    cache = {"ln": ln_cache, "lin1": lin1_cache, "swish": swish_cache,
             "mask1": mask1, "lin2": lin2_cache, "mask2": mask2}
    return y, cache


def feed_forward_bwd(params: ModelParams, prefix: str, dy: np.ndarray,
                     cache: dict) -> np.ndarray:
    da2 = f.dropout_bwd(dy, cache["mask2"])
    dd1, dW2, db2 = f.linear_bwd(da2, cache["lin2"])
    params.grads[prefix + ".W2"] += dW2
    params.grads[prefix + ".b2"] += db2
    ds1 = f.dropout_bwd(dd1, cache["mask1"])
    da1 = f.swish_bwd(ds1, cache["swish"])
    dh, dW1, db1 = f.linear_bwd(da1, cache["lin1"])
    params.grads[prefix + ".W1"] += dW1
    params.grads[prefix + ".b1"] += db1
    return _ln_bwd(params, prefix + ".ln", dh, cache["ln"])


def _relative_slice(cfg: ModelConfig, T: int) -> tuple[int, int, int]:
    """Table row range covering offsets -W..W for a sequence of length T."""
    W = min(T - 1, cfg.max_offset - 1)
    center = cfg.max_offset - 1
    return center - W, center + W + 1, W


def mhsa_fwd(params: ModelParams, prefix: str, x: np.ndarray,
             training: bool, rng) -> tuple[np.ndarray, dict]:
    """Multi-head self-attention with relative positional logits.

    Logits combine a content term (q + u) . k with a position term
    (q + v) . r[i-j]; both use per-head slices and 1/sqrt(head_dim) scaling.
    Offsets beyond the table span are clamped to its edges. No masking: every
    frame attends to the whole sequence.
    """
    cfg = params.config
    t = params.tensors
    T, d = x.shape
    nh, dh = cfg.num_heads, cfg.head_dim
    scale = 1.0 / np.sqrt(dh)

    h, ln_cache = _ln_fwd(params, prefix + ".ln", x, cfg.eps)
    Q = h @ t[prefix + ".Wq"]
    K = h @ t[prefix + ".Wk"]
    V = h @ t[prefix + ".Wv"]
    u, v = t[prefix + ".u"], t[prefix + ".v"]

    lo, hi, W = _relative_slice(cfg, T)
    rel = t[prefix + ".rel"][lo:hi]                       # [2W+1, d]
    offs = np.arange(T)[:, None] - np.arange(T)[None, :]  # i - j
    idx = np.clip(offs, -W, W) + W                        # into the slice

    heads = []
    probs = []
    logits_all = []
    for j in range(nh):
        sl = slice(j * dh, (j + 1) * dh)
        q, k, vv, r = Q[:, sl], K[:, sl], V[:, sl], rel[:, sl]
        ac = (q + u[sl]) @ k.T                            # content term
        wide = (q + v[sl]) @ r.T                          # [T, 2W+1]
        logits = (ac + wide[np.arange(T)[:, None], idx]) * scale
        A = f.softmax_rows(logits)
        heads.append(A @ vv)
        probs.append(A)
        logits_all.append(logits)
    concat = np.concatenate(heads, axis=1)
    out = concat @ t[prefix + ".Wo"]
    y, mask = f.dropout_fwd(out, cfg.dropout_rate, training, rng)
    cache = {"ln": ln_cache, "h": h, "Q": Q, "K": K, "V": V, "probs": probs,
             "concat": concat, "mask": mask, "idx": idx, "rel_range": (lo, hi),
             "logits": logits_all}
    return y, cache


def mhsa_bwd(params: ModelParams, prefix: str, dy: np.ndarray,
             cache: dict) -> np.ndarray:
    cfg = params.config
    t, g = params.tensors, params.grads
    nh, dh = cfg.num_heads, cfg.head_dim
    scale = 1.0 / np.sqrt(dh)
    h, Q, K, V = cache["h"], cache["Q"], cache["K"], cache["V"]
    T = h.shape[0]
    idx = cache["idx"]
    lo, hi = cache["rel_range"]
    rel = t[prefix + ".rel"][lo:hi]
    u, v = t[prefix + ".u"], t[prefix + ".v"]
    rows = np.arange(T)[:, None]

    dout = f.dropout_bwd(dy, cache["mask"])
    dconcat = dout @ t[prefix + ".Wo"].T
    g[prefix + ".Wo"] += cache["concat"].T @ dout

    dQ = np.zeros_like(Q)
    dK = np.zeros_like(K)
    dV = np.zeros_like(V)
    drel = np.zeros_like(rel)
    for j in range(nh):
        sl = slice(j * dh, (j + 1) * dh)
        q, k, vv, r = Q[:, sl], K[:, sl], V[:, sl], rel[:, sl]
        A = cache["probs"][j]
        dhead = dconcat[:, sl]
        dA = dhead @ vv.T
        dV[:, sl] = A.T @ dhead
        dlogits = f.softmax_bwd(dA, A) * scale
        # content term
        dq_u = dlogits @ k
        dK[:, sl] = dlogits.T @ (q + u[sl])
        # position term
        dwide = np.zeros((T, hi - lo))
        np.add.at(dwide, (rows, idx), dlogits)
        dq_v = dwide @ r
        drel[:, sl] += dwide.T @ (q + v[sl])
        dQ[:, sl] = dq_u + dq_v
        g[prefix + ".u"][sl] += dq_u.sum(axis=0)
        g[prefix + ".v"][sl] += dq_v.sum(axis=0)
    g[prefix + ".rel"][lo:hi] += drel

    dh_total = dQ @ t[prefix + ".Wq"].T + dK @ t[prefix + ".Wk"].T + dV @ t[prefix + ".Wv"].T
    g[prefix + ".Wq"] += h.T @ dQ
    g[prefix + ".Wk"] += h.T @ dK
    g[prefix + ".Wv"] += h.T @ dV
    return _ln_bwd(params, prefix + ".ln", dh_total, cache["ln"])


def conv_module_fwd(params: ModelParams, prefix: str, x: np.ndarray,
                    training: bool, rng) -> tuple[np.ndarray, dict]:
    """Pointwise expand + GLU, depthwise conv, batch norm, swish, project."""
    cfg = params.config
    t = params.tensors
    h, ln_cache = _ln_fwd(params, prefix + ".ln", x, cfg.eps)
    p1, lin1_cache = f.linear_fwd(h, t[prefix + ".W1"], t[prefix + ".b1"])
    gated, glu_cache = f.glu_fwd(p1)
    conv, conv_cache = f.depthwise_conv_fwd(gated, t[prefix + ".K"])
    bn, bn_cache = f.batch_norm_fwd(
        conv, t[prefix + ".bn.g"], t[prefix + ".bn.b"],
        params.buffers[prefix + ".bn.rmean"], params.buffers[prefix + ".bn.rvar"],
        cfg.bn_momentum, cfg.eps, training)
    act, swish_cache = f.swish_fwd(bn)
    p2, lin2_cache = f.linear_fwd(act, t[prefix + ".W2"], t[prefix + ".b2"])
    y, mask = f.dropout_fwd(p2, cfg.dropout_rate, training, rng)
    cache = {"ln": ln_cache, "lin1": lin1_cache, "glu": glu_cache,
             "conv": conv_cache, "bn": bn_cache, "swish": swish_cache,
             "lin2": lin2_cache, "mask": mask}
    return y, cache


def conv_module_bwd(params: ModelParams, prefix: str, dy: np.ndarray,
                    cache: dict) -> np.ndarray:
    g = params.grads
    dp2 = f.dropout_bwd(dy, cache["mask"])
    dact, dW2, db2 = f.linear_bwd(dp2, cache["lin2"])
    g[prefix + ".W2"] += dW2
    g[prefix + ".b2"] += db2
    dbn = f.swish_bwd(dact, cache["swish"])
    dconv, dbn_g, dbn_b = f.batch_norm_bwd(dbn, cache["bn"])
    g[prefix + ".bn.g"] += dbn_g
    g[prefix + ".bn.b"] += dbn_b
    dgated, dK = f.depthwise_conv_bwd(dconv, cache["conv"])
    g[prefix + ".K"] += dK
    dp1 = f.glu_bwd(dgated, cache["glu"])
    dh, dW1, db1 = f.linear_bwd(dp1, cache["lin1"])
    g[prefix + ".W1"] += dW1
    g[prefix + ".b1"] += db1
    return _ln_bwd(params, prefix + ".ln", dh, cache["ln"])


def conformer_block_fwd(params: ModelParams, layer: int, z: np.ndarray,
                        training: bool, rng) -> tuple[np.ndarray, dict]:
    """Half-step FFN, attention, convolution, half-step FFN, closing LN."""
    cfg = params.config
    p = f"layers.{layer}."
    ffn1, c_ffn1 = feed_forward_fwd(params, p + "ffn1", z, training, rng)
    z1 = z + 0.5 * ffn1
    attn, c_attn = mhsa_fwd(params, p + "attn", z1, training, rng)
    z2 = z1 + attn
    conv, c_conv = conv_module_fwd(params, p + "conv", z2, training, rng)
    z3 = z2 + conv
    ffn2, c_ffn2 = feed_forward_fwd(params, p + "ffn2", z3, training, rng)
    out, c_ln = _ln_fwd(params, p + "out_ln", z3 + 0.5 * ffn2, cfg.eps)
    cache = {"ffn1": c_ffn1, "attn": c_attn, "conv": c_conv, "ffn2": c_ffn2,
             "out_ln": c_ln}
    return out, cache


def conformer_block_bwd(params: ModelParams, layer: int, dy: np.ndarray,
                        cache: dict) -> np.ndarray:
    p = f"layers.{layer}."
    dz3_plus = _ln_bwd(params, p + "out_ln", dy, cache["out_ln"])
    dz3 = dz3_plus + feed_forward_bwd(params, p + "ffn2", 0.5 * dz3_plus, cache["ffn2"])
    dz2 = dz3 + conv_module_bwd(params, p + "conv", dz3, cache["conv"])
    dz1 = dz2 + mhsa_bwd(params, p + "attn", dz2, cache["attn"])
    dz = dz1 + feed_forward_bwd(params, p + "ffn1", 0.5 * dz1, cache["ffn1"])
    return dz
