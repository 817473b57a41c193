"""Turn per-frame component activations into a chord sequence.

The observation score of vocabulary entry v at frame t is the sum of the six
component log-probabilities of v's encoding; decoding maximizes the summed
observation scores minus a fixed penalty per label change (a linear-chain CRF
with a uniform transition potential, solved exactly by Viterbi). Everything
stays in the log domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chords import ChordInterval, ChordVocabulary
from .net.model import ComponentActivations

__all__ = [
    "DecodeLattice",
    "ChordPath",
    "build_lattice",
    "greedy_decode",
    "viterbi_decode",
    "path_score",
    "frames_to_intervals",
]


@dataclass(frozen=True)
class DecodeLattice:
    """obs_logp[t, v]: log-probability score of chord v at frame t."""

    obs_logp: np.ndarray

    def __post_init__(self):
        if self.obs_logp.ndim != 2:
            raise ValueError("lattice must be [T x |V|]")
        if self.obs_logp.shape[0] == 0 or self.obs_logp.shape[1] == 0:
            raise ValueError("lattice must be non-empty")
        if not np.all(np.isfinite(self.obs_logp)):
            raise ValueError("lattice entries must be finite")

    @property
    def num_frames(self) -> int:
        return self.obs_logp.shape[0]

    @property
    def num_labels(self) -> int:
        return self.obs_logp.shape[1]


@dataclass(frozen=True)
class ChordPath:
    ids: np.ndarray
    score: float

    def __len__(self) -> int:
        return len(self.ids)


def build_lattice(acts: ComponentActivations,
                  vocab: ChordVocabulary) -> DecodeLattice:
    """Score every vocabulary entry at every frame from the activations."""
    if len(vocab) == 0:
        raise ValueError("empty vocabulary")
    tuples = np.array([c.as_tuple() for c in vocab.chords], dtype=np.int64)  # [V x 6]
    obs = np.zeros((acts.num_frames, len(vocab)))
    for j, log_beta in enumerate(acts.log_betas):
        comp = tuples[:, j]
        if comp.max() >= log_beta.shape[1]:
            raise ValueError(
                f"vocabulary component {j} index {comp.max()} exceeds "
                f"activation width {log_beta.shape[1]}")
        obs += log_beta[:, comp]
    return DecodeLattice(obs)


def path_score(lattice: DecodeLattice, ids: np.ndarray,
               transition_penalty: float) -> float:
    """Score of a specific path, accumulated exactly like the decoder."""
    obs = lattice.obs_logp
    score = obs[0, ids[0]]
    for t in range(1, len(ids)):
        if ids[t] != ids[t - 1]:
            score = score - transition_penalty
        score = score + obs[t, ids[t]]
    return float(score)


def greedy_decode(lattice: DecodeLattice) -> ChordPath:
    """Per-frame argmax; ties go to the lowest vocabulary index."""
    ids = lattice.obs_logp.argmax(axis=1)
    return ChordPath(ids, path_score(lattice, ids, 0.0))


def viterbi_decode(lattice: DecodeLattice,
                   transition_penalty: float) -> ChordPath:
    """Maximum-score path under a uniform label-change penalty.

    Runs the stay-vs-switch recurrence in O(T * |V|) using the best and
    second-best previous scores: switching into v costs the penalty and can
    only come from the best previous label other than v. Ties prefer staying
    (fewer transitions), then the lowest index.
    """
    if transition_penalty < 0:
        raise ValueError("transition_penalty must be non-negative")
    obs = lattice.obs_logp
    T, V = obs.shape
    if transition_penalty == 0.0 or T == 1:
        return greedy_decode(lattice)

    prev = obs[0].copy()
    backptr = np.empty((T, V), dtype=np.int32)
    for t in range(1, T):
        best = int(prev.argmax())
        second = -np.inf
        second_idx = best
        if V > 1:
            masked = prev.copy()
            masked[best] = -np.inf
            second_idx = int(masked.argmax())
            second = masked[second_idx]
        switch_from = np.full(V, best, dtype=np.int32)
        switch_score = np.full(V, prev[best] - transition_penalty)
        switch_from[best] = second_idx
        switch_score[best] = second - transition_penalty
        stay = prev
        take_stay = stay >= switch_score
        backptr[t] = np.where(take_stay, np.arange(V, dtype=np.int32), switch_from)
        prev = np.where(take_stay, stay, switch_score) + obs[t]

    ids = np.empty(T, dtype=np.int64)
    ids[T - 1] = int(prev.argmax())
    for t in range(T - 1, 0, -1):
        ids[t - 1] = backptr[t, ids[t]]
    return ChordPath(ids, float(prev[ids[T - 1]]))


def frames_to_intervals(path: ChordPath, frame_rate: float,
                        vocab: ChordVocabulary) -> list[ChordInterval]:
    """Merge equal-id runs into labelled intervals on the frame grid."""
    if len(path) == 0:
        raise ValueError("empty path")
    ids = path.ids
    boundaries = np.flatnonzero(np.diff(ids)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(ids)]])
    return [ChordInterval(s / frame_rate, e / frame_rate, vocab.symbols[ids[s]])
            for s, e in zip(starts, ends)]
