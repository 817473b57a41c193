"""Full encoder: input projection, conformer stack, six softmax heads."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import CqtSpectrogram, DB_FLOOR
from .params import ModelParams
from .blocks import conformer_block_fwd, conformer_block_bwd
from . import functional as f


@dataclass(frozen=True)
class ComponentActivations:
    """Per-frame component probabilities (Eq.-7-style group softmax).

    betas[j] is [T x M_j] with rows summing to one; scores[j] holds the
    pre-softmax head outputs and log_betas[j] the stable log-probabilities.
    """

    betas: tuple[np.ndarray, ...]
    scores: tuple[np.ndarray, ...]
    log_betas: tuple[np.ndarray, ...]

    @property
    def num_frames(self) -> int:
        return self.betas[0].shape[0]


def spectrogram_to_input(data: np.ndarray) -> np.ndarray:
    """Map dB values in [-80, 0] onto [0, 1] model inputs."""
    return np.asarray(data, dtype=np.float64) / -DB_FLOOR + 1.0


def _split_scores(scores: np.ndarray, sizes) -> tuple[np.ndarray, ...]:
    out = []
    start = 0
    for size in sizes:
        out.append(scores[:, start:start + size])
        start += size
    return tuple(out)


def model_forward(spec: CqtSpectrogram | np.ndarray, params: ModelParams,
                  training: bool = False, rng: np.random.Generator | None = None,
                  want_cache: bool = False):
    """Run the encoder on one spectrogram.

    Accepts a dB CqtSpectrogram or a raw [T x bins] dB matrix. Returns
    ComponentActivations, plus the forward cache when want_cache is set
    (required before calling model_backward). Training mode draws dropout
    masks from rng and lets batch norm use per-sequence statistics.
    """
    cfg = params.config
    if isinstance(spec, CqtSpectrogram):
        if spec.scale != "db":
            raise ValueError("model input must be a dB-scaled spectrogram")
        data = spec.data
    else:
        data = spec
    if data.ndim != 2 or data.shape[1] != cfg.cqt_bins:
        raise ValueError(f"expected [T x {cfg.cqt_bins}] input, got {data.shape}")
    if training and cfg.dropout_rate > 0.0 and rng is None:
        raise ValueError("training forward with dropout needs an rng")

    x = spectrogram_to_input(data)
    t = params.tensors
    z, proj_cache = f.linear_fwd(x, t["proj.W"], t["proj.b"])
    z, proj_ln_cache = f.layer_norm_fwd(z, t["proj_ln.g"], t["proj_ln.b"], cfg.eps)
    block_caches = []
    for i in range(cfg.num_layers):
        z, cache = conformer_block_fwd(params, i, z, training, rng)
        block_caches.append(cache)
    scores_flat, head_cache = f.linear_fwd(z, t["head.W"], t["head.b"])

    scores = _split_scores(scores_flat, cfg.component_sizes)
    betas = tuple(f.softmax_rows(s) for s in scores)
    log_betas = tuple(f.log_softmax_rows(s) for s in scores)
    acts = ComponentActivations(betas, scores, log_betas)
    if not want_cache:
        return acts
    cache = {"proj": proj_cache, "proj_ln": proj_ln_cache,
             "blocks": block_caches, "head": head_cache}
    return acts, cache


def model_backward(score_grads, params: ModelParams, cache: dict) -> np.ndarray:
    """Backpropagate gradients w.r.t. the six score groups.

    Accumulates into params.grads and returns the gradient with respect to
    the [T x bins] model input (after dB-to-[0,1] mapping).
    """
    if cache is None:
        raise ValueError("model_backward needs the cache from model_forward(want_cache=True)")
    cfg = params.config
    dscores = np.concatenate(list(score_grads), axis=1)
    if dscores.shape[1] != cfg.output_dim:
        raise ValueError(f"score gradients cover {dscores.shape[1]} classes, "
                         f"expected {cfg.output_dim}")
    dz, dW, db = f.linear_bwd(dscores, cache["head"])
    params.grads["head.W"] += dW
    params.grads["head.b"] += db
    for i in reversed(range(cfg.num_layers)):
        dz = conformer_block_bwd(params, i, dz, cache["blocks"][i])
    dz, dg, dbeta = f.layer_norm_bwd(dz, cache["proj_ln"])
    params.grads["proj_ln.g"] += dg
    params.grads["proj_ln.b"] += dbeta
    dx, dW, db = f.linear_bwd(dz, cache["proj"])
    params.grads["proj.W"] += dW
    params.grads["proj.b"] += db
    return dx
