"""Training orchestration: fold splitting, segment sampling, AdamW, the
plateau learning-rate schedule, and the epoch loop.

Determinism contract: every operation here is a pure function of its config
and seed. Per-track randomness (variant choice, segment start, dropout) comes
from streams derived from (seed, track_id), so batch composition and worker
parallelism cannot change results.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .chords import ChordVocabulary
from .features import DB_FLOOR, read_features
from .net import ModelConfig, ModelParams, model_forward, model_backward, save_checkpoint
from .objective import (
    component_targets,
    compute_class_weights,
    count_components,
    weighted_cross_entropy,
)

__all__ = [
    "SplitPlan",
    "TrainConfig",
    "TrackFeatures",
    "OptimizerState",
    "PlateauState",
    "TrainingError",
    "kfold_split",
    "sample_segment",
    "adamw_init",
    "adamw_step",
    "lr_schedule_step",
    "plateau_step",
    "train_loop",
    "load_feature_dir",
    "feature_file_name",
    "parse_feature_file_name",
]


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class SplitPlan:
    """Per-fold train/val/test track-id lists; folds index 0..fold_count-1."""

    folds: tuple[dict, ...]
    seed: int

    @property
    def fold_count(self) -> int:
        return len(self.folds)


def kfold_split(track_ids: Sequence[str], seed: int, fold_count: int = 5) -> SplitPlan:
    """Deterministic shuffled k-fold partition (60/20/20 at five folds).

    Fold i tests on chunk i and validates on chunk i+1 (mod k); the rest
    trains. Every track appears in exactly one test chunk across folds.
    Augmented feature variants are keyed by base track id, so they follow
    their source track automatically.
    """
    ids = sorted(set(track_ids))
    if len(ids) < fold_count:
        raise ValueError(f"need at least {fold_count} tracks, got {len(ids)}")
    order = np.random.default_rng(np.random.SeedSequence([seed, 0xF01D])).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    chunks = [list(c) for c in np.array_split(shuffled, fold_count)]
    folds = []
    for i in range(fold_count):
        test = chunks[i]
        val = chunks[(i + 1) % fold_count]
        train = [t for j, c in enumerate(chunks) if j != i and j != (i + 1) % fold_count
                 for t in c]
        folds.append({"train": sorted(train), "val": sorted(val), "test": sorted(test)})
    return SplitPlan(tuple(folds), seed)


@dataclass(frozen=True)
class TrainConfig:
    segment_length: int = 1000
    batch_size: int = 24
    init_lr: float = 1e-3
    lr_factor: float = 0.1
    patience: int = 5
    stop_lr: float = 1e-6
    reweight_gamma: float = 0.0
    reweight_wmax: float = 1.0
    transition_penalty: float = 2.0
    seed: int = 0
    max_epochs: int = 1000
    weight_decay: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.segment_length < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("segment_length, batch_size and patience must be positive")
        if self.init_lr <= 0 or self.stop_lr <= 0 or not 0 < self.lr_factor < 1:
            raise ValueError("learning-rate settings must be positive (factor in (0,1))")


@dataclass(frozen=True)
class TrackFeatures:
    """One feature-file worth of training material."""

    track_id: str
    shift: int
    data: np.ndarray        # [T x bins] dB
    ids: np.ndarray         # [T] vocabulary ids
    targets: np.ndarray     # [T x 6] component class indices

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]


def track_features_from_ids(track_id: str, shift: int, data: np.ndarray,
                            ids: np.ndarray, vocab: ChordVocabulary) -> TrackFeatures:
    chords = [vocab.chords[i] for i in ids]
    return TrackFeatures(track_id, shift, data, np.asarray(ids), component_targets(chords))


def sample_segment(track: TrackFeatures, segment_length: int,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Uniformly random fixed-length slice; short tracks are right-padded
    with silence frames labelled no-chord."""
    T = track.num_frames
    if T < 1:
        raise ValueError(f"track {track.track_id} has no frames")
    if T <= segment_length:
        start = 0
    else:
        start = int(rng.integers(0, T - segment_length + 1))
    data = track.data[start:start + segment_length]
    targets = track.targets[start:start + segment_length]
    if len(data) < segment_length:
        pad = segment_length - len(data)
        data = np.vstack([data, np.full((pad, data.shape[1]), DB_FLOOR, dtype=data.dtype)])
        targets = np.vstack([targets, np.zeros((pad, 6), dtype=targets.dtype)])
    return data, targets


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int
    learning_rate: float
    weight_decay: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adamw_init(params: ModelParams, config: TrainConfig) -> OptimizerState:
    return OptimizerState(
        m={k: np.zeros_like(t) for k, t in params.tensors.items()},
        v={k: np.zeros_like(t) for k, t in params.tensors.items()},
        step=0,
        learning_rate=config.init_lr,
        weight_decay=config.weight_decay,
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        eps=config.adam_eps,
    )


def adamw_step(params: ModelParams, state: OptimizerState) -> None:
    """One decoupled-weight-decay update from params.grads, in place."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.step
    bias2 = 1.0 - b2 ** state.step
    lr = state.learning_rate
    for name in sorted(params.tensors):
        g = params.grads[name]
        if g.shape != params.tensors[name].shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / bias1) / (np.sqrt(v / bias2) + state.eps)
        p = params.tensors[name]
        p -= lr * update
        if state.weight_decay:
            p -= lr * state.weight_decay * p


@dataclass
class PlateauState:
    learning_rate: float
    factor: float = 0.1
    patience: int = 5
    stop_lr: float = 1e-6
    tolerance: float = 1e-8
    best: float = np.inf
    since_improvement: int = 0
    stop: bool = False


def plateau_step(state: PlateauState, val_loss: float) -> PlateauState:
    """Advance the plateau schedule by one epoch's validation loss."""
    state = replace(state)
    if val_loss < state.best - state.tolerance:
        state.best = val_loss
        state.since_improvement = 0
    else:
        state.since_improvement += 1
    if state.since_improvement >= state.patience:
        state.learning_rate *= state.factor
        state.since_improvement = 0
        if state.learning_rate < state.stop_lr:
            state.stop = True
    return state


def lr_schedule_step(state: PlateauState, val_loss_history: Sequence[float]
                     ) -> tuple[float, bool]:
    """Replay a validation-loss history through the schedule.

    Returns the resulting learning rate and whether training should stop.
    """
    if not len(val_loss_history):
        raise ValueError("validation loss history must be non-empty")
    for loss in val_loss_history:
        state = plateau_step(state, loss)
        if state.stop:
            break
    return state.learning_rate, state.stop


def _track_stream(seed: int, track_id: str, epoch: int) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{track_id}".encode()).digest()
    base = int.from_bytes(digest[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([base, epoch]))


@dataclass
class TrainResult:
    best_params: ModelParams
    final_params: ModelParams
    log_rows: list[dict]
    best_val_loss: float
    stopped_early: bool


def _segment_loss_and_grads(params, data, targets, weights, training, rng):
    acts, cache = model_forward(data, params, training=training, rng=rng, want_cache=True)
    loss, score_grads = weighted_cross_entropy(acts, targets, weights)
    return loss, score_grads, cache


def train_loop(config: TrainConfig, model_config: ModelConfig,
               features: Mapping[str, Sequence[TrackFeatures]],
               train_ids: Sequence[str], val_ids: Sequence[str],
               out_dir: str | Path | None = None,
               log_every: int = 0) -> TrainResult:
    """Run the full optimization loop on materialized features.

    features maps base track id to its variants (shift 0 first is not
    required). Each epoch samples one segment per training track, choosing a
    variant and a start offset from the track's private stream; validation
    always scores the shift-0 variant's leading segment in eval mode. The
    best-validation parameters are kept (and written to best.ckpt when
    out_dir is given) together with a CSV log of epoch, losses and lr.
    """
    for tid in list(train_ids) + list(val_ids):
        if tid not in features or not features[tid]:
            raise ValueError(f"no features for track {tid!r}")

    counts = count_components(np.vstack(
        [variant.targets for tid in train_ids for variant in features[tid]]))
    weights = compute_class_weights(counts, config.reweight_gamma, config.reweight_wmax)

    params = ModelParams(model_config, np.random.default_rng(
        np.random.SeedSequence([config.seed, 0x1A17])))
    opt = adamw_init(params, config)
    sched = PlateauState(learning_rate=config.init_lr, factor=config.lr_factor,
                         patience=config.patience, stop_lr=config.stop_lr)

    def shift0(tid: str) -> TrackFeatures:
        for variant in features[tid]:
            if variant.shift == 0:
                return variant
        return features[tid][0]

    val_segments = []
    for tid in sorted(val_ids):
        variant = shift0(tid)
        data = variant.data[:config.segment_length]
        targets = variant.targets[:config.segment_length]
        val_segments.append((data, targets))

    def validation_loss(p: ModelParams) -> float:
        total, frames = 0.0, 0
        for data, targets in val_segments:
            acts = model_forward(data, p, training=False)
            loss, _ = weighted_cross_entropy(acts, targets, weights)
            total += loss
            frames += len(targets)
        return total / max(frames, 1)

    log_rows: list[dict] = []
    best_val = np.inf
    best_params = params.copy()
    stopped = False
    train_order = sorted(train_ids)

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    for epoch in range(1, config.max_epochs + 1):
        order_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x07D3, epoch]))
        perm = order_rng.permutation(len(train_order))
        epoch_ids = [train_order[i] for i in perm]

        epoch_loss, epoch_frames = 0.0, 0
        opt.learning_rate = sched.learning_rate
        for batch_start in range(0, len(epoch_ids), config.batch_size):
            batch = epoch_ids[batch_start:batch_start + config.batch_size]
            params.zero_grads()
            # Every sampled segment is padded to segment_length frames, so
            # the per-frame normalization is known before the pass.
            scale = 1.0 / (len(batch) * config.segment_length)
            batch_loss, batch_frames = 0.0, 0
            for tid in batch:
                rng = _track_stream(config.seed, tid, epoch)
                variants = features[tid]
                variant = variants[int(rng.integers(0, len(variants)))] \
                    if len(variants) > 1 else variants[0]
                data, targets = sample_segment(variant, config.segment_length, rng)
                loss, score_grads, cache = _segment_loss_and_grads(
                    params, data, targets, weights, True, rng)
                if not np.isfinite(loss):
                    _dump_bad_batch(out_path, epoch, batch, tid, data, targets)
                    raise TrainingError(
                        f"non-finite loss {loss} at epoch {epoch}, track {tid!r}")
                model_backward([g * scale for g in score_grads], params, cache)
                batch_loss += loss
                batch_frames += len(targets)
            adamw_step(params, opt)
            epoch_loss += batch_loss
            epoch_frames += batch_frames

        train_loss = epoch_loss / max(epoch_frames, 1)
        val_loss = validation_loss(params)
        sched = plateau_step(sched, val_loss)
        log_rows.append({"epoch": epoch, "train_loss": train_loss,
                         "val_loss": val_loss, "lr": sched.learning_rate})
        if log_every and epoch % log_every == 0:
            print(f"epoch {epoch}: train {train_loss:.4f} val {val_loss:.4f} "
                  f"lr {sched.learning_rate:g}")
        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            if out_path is not None:
                save_checkpoint(out_path / "best.ckpt", best_params)
        if sched.stop:
            stopped = True
            break

    if out_path is not None:
        if not (out_path / "best.ckpt").exists():
            save_checkpoint(out_path / "best.ckpt", best_params)
        _write_log(out_path / "training_log.csv", log_rows)
    return TrainResult(best_params, params, log_rows, best_val, stopped)


def _write_log(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "lr"])
        for row in rows:
            writer.writerow([row["epoch"], repr(row["train_loss"]),
                             repr(row["val_loss"]), repr(row["lr"])])


def _dump_bad_batch(out_path: Path | None, epoch: int, batch: list[str],
                    tid: str, data: np.ndarray, targets: np.ndarray) -> None:
    if out_path is None:
        return
    np.savez(out_path / "diverged_batch.npz", epoch=epoch, batch=batch,
             track=tid, data=data, targets=targets)


def feature_file_name(stem: str, shift: int) -> str:
    return f"{stem}.shift{shift:+d}.cqtf"


def parse_feature_file_name(name: str) -> tuple[str, int] | None:
    if not name.endswith(".cqtf"):
        return None
    body = name[:-len(".cqtf")]
    stem, sep, shift_part = body.rpartition(".shift")
    if not sep or not stem:
        return None
    try:
        return stem, int(shift_part)
    except ValueError:
        return None


def load_feature_dir(directory: str | Path, vocab: ChordVocabulary
                     ) -> dict[str, list[TrackFeatures]]:
    """Group feature files by base track id, shift 0 first."""
    directory = Path(directory)
    grouped: dict[str, list[TrackFeatures]] = {}
    for path in sorted(directory.glob("*.cqtf")):
        parsed = parse_feature_file_name(path.name)
        if parsed is None:
            continue
        stem, shift = parsed
        spec, labels, _ = read_features(path, vocab)
        grouped.setdefault(stem, []).append(
            track_features_from_ids(stem, shift, spec.data, labels.ids, vocab))
    for variants in grouped.values():
        variants.sort(key=lambda tf: (tf.shift != 0, tf.shift))
    return grouped
