"""Class-frequency reweighting and the weighted cross-entropy objective.

Weights follow w = min((n / max n) ** -gamma, w_max) per component class,
so the most frequent class of each component always gets weight 1 and rare
classes are amplified up to the clamp. The loss sums over frames and the
six components; its gradient with respect to the head scores uses the
softmax/cross-entropy identity w * (beta - onehot).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chords import COMPONENT_SIZES
from .net.model import ComponentActivations

__all__ = [
    "ClassWeights",
    "ComponentCounts",
    "component_targets",
    "count_components",
    "compute_class_weights",
    "weighted_cross_entropy",
    "export_weight_table",
]

_COMPONENT_LABELS = ("root_triad", "bass", "seventh", "ninth", "eleventh", "thirteenth")


@dataclass(frozen=True)
class ComponentCounts:
    """Training-frame counts per class of each of the six components."""

    n: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.n) != len(COMPONENT_SIZES):
            raise ValueError("expected six component count vectors")
        for counts, size in zip(self.n, COMPONENT_SIZES):
            if len(counts) != size:
                raise ValueError(f"count vector of length {len(counts)}, expected {size}")
            if counts.min() < 0:
                raise ValueError("counts must be non-negative")
        if any(counts.max() == 0 for counts in self.n):
            raise ValueError("every component needs at least one observed class")


@dataclass(frozen=True)
class ClassWeights:
    w: tuple[np.ndarray, ...]
    gamma: float
    w_max: float

    @classmethod
    def uniform(cls) -> "ClassWeights":
        return cls(tuple(np.ones(size) for size in COMPONENT_SIZES), 0.0, 1.0)


def component_targets(chords) -> np.ndarray:
    """[T x 6] class indices from a sequence of StructuredChord labels."""
    return np.array([c.as_tuple() for c in chords], dtype=np.int64)


def count_components(target_matrix: np.ndarray) -> ComponentCounts:
    """Tally per-component class counts from an [N x 6] target matrix."""
    counts = []
    for j, size in enumerate(COMPONENT_SIZES):
        counts.append(np.bincount(target_matrix[:, j], minlength=size).astype(np.int64))
    return ComponentCounts(tuple(counts))


def compute_class_weights(counts: ComponentCounts, gamma: float,
                          w_max: float) -> ClassWeights:
    """Inverse-frequency weights with exponent gamma, clamped at w_max.

    Classes with zero training frames take the clamp value (the formula's
    limit as n -> 0).
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma {gamma} outside [0, 1]")
    if w_max < 1.0:
        raise ValueError(f"w_max {w_max} must be at least 1")
    weights = []
    for n in counts.n:
        n = n.astype(np.float64)
        peak = n.max()
        w = np.full(n.shape, w_max)
        seen = n > 0
        w[seen] = np.minimum((n[seen] / peak) ** -gamma, w_max)
        weights.append(w)
    return ClassWeights(tuple(weights), gamma, w_max)


def weighted_cross_entropy(acts: ComponentActivations, targets: np.ndarray,
                           weights: ClassWeights) -> tuple[float, tuple[np.ndarray, ...]]:
    """Loss over all frames and components, plus gradients w.r.t. scores.

    targets is [T x 6] class indices. Returns (loss, score_grads) where
    score_grads[j] is [T x M_j], ready for model_backward.
    """
    T = acts.num_frames
    if targets.shape != (T, 6):
        raise ValueError(f"targets shape {targets.shape}, expected {(T, 6)}")
    loss = 0.0
    grads = []
    rows = np.arange(T)
    for j, (beta, log_beta) in enumerate(zip(acts.betas, acts.log_betas)):
        z = targets[:, j]
        if z.min() < 0 or z.max() >= beta.shape[1]:
            raise ValueError(f"component {j} target outside 0..{beta.shape[1] - 1}")
        w = weights.w[j][z]                       # [T]
        loss -= float(w @ log_beta[rows, z])
        grad = beta * w[:, None]
        grad[rows, z] -= w
        grads.append(grad)
    return loss, tuple(grads)


def export_weight_table(path: str | Path, counts: ComponentCounts,
                        weights: ClassWeights, class_names=None) -> None:
    """CSV audit table: component, class, count, weight."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "class", "count", "weight"])
        for j, label in enumerate(_COMPONENT_LABELS):
            for m in range(COMPONENT_SIZES[j]):
                name = class_names[j][m] if class_names else str(m)
                writer.writerow([label, name, int(counts.n[j][m]),
                                 repr(float(weights.w[j][m]))])
