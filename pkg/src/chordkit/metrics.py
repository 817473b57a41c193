"""Chord-recognition scoring: duration-weighted recall per comparison family,
large-vocabulary frame/class accuracy, and quality confusion matrices.

Evaluation is frame-based: reference and estimate intervals are sampled at
the feature frame rate and compared frame by frame, so the duration-weighted
recall families and the vocabulary accuracies share one code path. The
majmin and sevenths families exclude reference frames whose chord has no
projection into their restricted vocabularies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .chords import (
    ChordInterval,
    ChordVocabulary,
    METRIC_KINDS,
    StructuredChord,
    compare,
    in_metric_vocabulary,
)
from .features import SAMPLE_RATE, HOP_LENGTH, align_labels_to_frames

__all__ = [
    "TrackEval",
    "DEFAULT_FRAME_RATE",
    "evaluate_track",
    "wcsr",
    "wcsr_from_evals",
    "acc_frame",
    "acc_class",
    "acc_frame_from_evals",
    "acc_class_from_evals",
    "confusion_matrix",
    "per_quality_recall",
    "frame_count_for_duration",
]

DEFAULT_FRAME_RATE = SAMPLE_RATE / HOP_LENGTH


@dataclass(frozen=True)
class TrackEval:
    """Per-track tallies, in seconds, from which every score aggregates."""

    track_id: str
    scored: dict[str, float]       # per family: duration entering the denominator
    correct: dict[str, float]      # per family: correctly matched duration
    class_seconds: np.ndarray      # [|V|] reference duration per vocabulary id
    class_correct: np.ndarray      # [|V|] exactly matched duration per id


def frame_count_for_duration(duration: float, frame_rate: float) -> int:
    """Number of frame centers (t + 0.5)/rate falling inside [0, duration)."""
    return max(int(np.floor(duration * frame_rate + 0.5)), 0)


def _frame_chords(intervals: Sequence[ChordInterval], frame_count: int,
                  frame_rate: float, vocab: ChordVocabulary,
                  ) -> tuple[list[StructuredChord], np.ndarray]:
    labels = align_labels_to_frames(list(intervals), frame_count, frame_rate, vocab)
    return list(labels.chords), labels.ids.astype(np.int64)


def evaluate_track(track_id: str, ref_intervals: Sequence[ChordInterval],
                   est_intervals: Sequence[ChordInterval], vocab: ChordVocabulary,
                   frame_rate: float = DEFAULT_FRAME_RATE) -> TrackEval:
    """Frame-sample one track and tally every comparison family at once."""
    duration = max((iv.end for iv in ref_intervals), default=0.0)
    T = frame_count_for_duration(duration, frame_rate)
    ref_chords, ref_ids = _frame_chords(ref_intervals, T, frame_rate, vocab)
    est_chords, est_ids = _frame_chords(est_intervals, T, frame_rate, vocab)
    dt = 1.0 / frame_rate

    # Compare once per distinct (ref, est) chord pair, then weight by count.
    pair_index: dict[tuple, int] = {}
    pair_chords: list[tuple[StructuredChord, StructuredChord]] = []
    pair_of_frame = np.empty(T, dtype=np.int64)
    for t, (rc, ec) in enumerate(zip(ref_chords, est_chords)):
        key = (rc.as_tuple(), ec.as_tuple())
        idx = pair_index.get(key)
        if idx is None:
            idx = len(pair_chords)
            pair_index[key] = idx
            pair_chords.append((rc, ec))
        pair_of_frame[t] = idx
    pair_counts = np.bincount(pair_of_frame, minlength=len(pair_chords))

    scored: dict[str, float] = {}
    correct: dict[str, float] = {}
    for metric in METRIC_KINDS:
        z = 0.0
        total = 0.0
        for (rc, ec), count in zip(pair_chords, pair_counts):
            if not in_metric_vocabulary(metric, rc):
                continue
            total += count * dt
            if compare(metric, rc, ec):
                z += count * dt
        scored[metric] = total
        correct[metric] = z

    class_seconds = np.bincount(ref_ids, minlength=len(vocab)).astype(np.float64) * dt
    matches = ref_ids[ref_ids == est_ids]
    class_correct = np.bincount(matches, minlength=len(vocab)).astype(np.float64) * dt
    return TrackEval(track_id, scored, correct, class_seconds, class_correct)


def _check_track_sets(refs: Mapping, ests: Mapping) -> list[str]:
    missing = sorted(set(refs) ^ set(ests))
    if missing:
        raise ValueError(f"reference/estimate track sets differ on: {missing}")
    return sorted(refs)


def wcsr_from_evals(evals: Sequence[TrackEval], metric: str) -> float:
    if metric not in METRIC_KINDS:
        raise ValueError(f"unknown metric kind {metric!r}")
    total = sum(e.scored[metric] for e in evals)
    if total == 0.0:
        return 0.0
    return 100.0 * sum(e.correct[metric] for e in evals) / total


def wcsr(refs: Mapping[str, Sequence[ChordInterval]],
         ests: Mapping[str, Sequence[ChordInterval]], metric: str,
         vocab: ChordVocabulary, frame_rate: float = DEFAULT_FRAME_RATE) -> float:
    """Duration-weighted chord symbol recall, as a percentage."""
    tracks = _check_track_sets(refs, ests)
    evals = [evaluate_track(t, refs[t], ests[t], vocab, frame_rate) for t in tracks]
    return wcsr_from_evals(evals, metric)


def _check_id_sets(refs: Mapping[str, np.ndarray],
                   ests: Mapping[str, np.ndarray]) -> list[str]:
    tracks = _check_track_sets(refs, ests)
    for t in tracks:
        if len(refs[t]) != len(ests[t]):
            raise ValueError(
                f"track {t!r}: {len(refs[t])} reference frames vs "
                f"{len(ests[t])} estimated")
    return tracks


def acc_frame(refs: Mapping[str, np.ndarray], ests: Mapping[str, np.ndarray]) -> float:
    """Fraction of frames whose vocabulary id matches exactly."""
    tracks = _check_id_sets(refs, ests)
    total = sum(len(refs[t]) for t in tracks)
    if total == 0:
        return 0.0
    hits = sum(int((np.asarray(refs[t]) == np.asarray(ests[t])).sum()) for t in tracks)
    return hits / total


def acc_class(refs: Mapping[str, np.ndarray], ests: Mapping[str, np.ndarray],
              num_classes: int) -> float:
    """Mean per-class recall over the classes present in the references."""
    tracks = _check_id_sets(refs, ests)
    seconds = np.zeros(num_classes)
    correct = np.zeros(num_classes)
    for t in tracks:
        r = np.asarray(refs[t], dtype=np.int64)
        e = np.asarray(ests[t], dtype=np.int64)
        seconds += np.bincount(r, minlength=num_classes)
        correct += np.bincount(r[r == e], minlength=num_classes)
    present = seconds > 0
    if not present.any():
        return 0.0
    return float((correct[present] / seconds[present]).mean())


def acc_frame_from_evals(evals: Sequence[TrackEval]) -> float:
    total = sum(float(e.class_seconds.sum()) for e in evals)
    if total == 0.0:
        return 0.0
    return sum(float(e.class_correct.sum()) for e in evals) / total


def acc_class_from_evals(evals: Sequence[TrackEval]) -> float:
    seconds = np.sum([e.class_seconds for e in evals], axis=0)
    correct = np.sum([e.class_correct for e in evals], axis=0)
    present = seconds > 0
    if not present.any():
        return 0.0
    return float((correct[present] / seconds[present]).mean())


def quality_classes(vocab: ChordVocabulary) -> list[str]:
    """Quality labels (roots factored out) in vocabulary order, N first."""
    seen: list[str] = []
    for idx in range(len(vocab)):
        q = vocab.quality_of(idx)
        if q not in seen:
            seen.append(q)
    return seen


def confusion_matrix(refs: Mapping[str, np.ndarray], ests: Mapping[str, np.ndarray],
                     vocab: ChordVocabulary, qualities: list[str] | None = None,
                     frame_rate: float = DEFAULT_FRAME_RATE
                     ) -> tuple[np.ndarray, list[str]]:
    """Duration-weighted (reference quality, estimated quality) counts.

    Rows are reference qualities, columns estimates, entries in seconds.
    Raises if a frame's quality is missing from the class list.
    """
    tracks = _check_id_sets(refs, ests)
    if qualities is None:
        qualities = quality_classes(vocab)
    index = {q: i for i, q in enumerate(qualities)}
    id_quality = np.empty(len(vocab), dtype=np.int64)
    for v in range(len(vocab)):
        q = vocab.quality_of(v)
        if q not in index:
            raise ValueError(f"quality {q!r} not in the class list")
        id_quality[v] = index[q]
    n = len(qualities)
    counts = np.zeros((n, n))
    dt = 1.0 / frame_rate
    for t in tracks:
        rq = id_quality[np.asarray(refs[t], dtype=np.int64)]
        eq = id_quality[np.asarray(ests[t], dtype=np.int64)]
        np.add.at(counts, (rq, eq), dt)
    return counts, qualities


def per_quality_recall(counts: np.ndarray, qualities: list[str]
                       ) -> list[tuple[str, float, float]]:
    """(quality, reference seconds, recall) rows from a confusion matrix."""
    out = []
    for i, q in enumerate(qualities):
        total = float(counts[i].sum())
        recall = float(counts[i, i] / total) if total > 0 else float("nan")
        out.append((q, total, recall))
    return out
