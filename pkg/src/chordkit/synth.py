"""Synthetic chord audio for desk-scale verification.

Tracks are random chord interval sequences rendered as sums of sinusoids at
each chord's pitch classes across octaves 2-5, optionally with Gaussian
noise at a target SNR. The annotation always covers every analysis frame,
so a one-chord palette yields wall-to-wall labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chords import ChordInterval, ChordVocabulary, parse_chord_symbol, pitch_classes
from .features import (
    AudioClip,
    CqtSpectrogram,
    FrameLabels,
    FMIN_HZ,
    SAMPLE_RATE,
    HOP_LENGTH,
    align_labels_to_frames,
    compute_cqt,
    frame_count_for,
    to_db,
)

__all__ = ["SynthConfig", "SynthTrack", "render_chord_tone", "make_track", "synth_dataset"]


@dataclass(frozen=True)
class SynthConfig:
    palette: tuple[str, ...]
    palette_weights: tuple[float, ...] | None = None
    num_tracks: int = 10
    track_seconds: tuple[float, float] = (4.0, 8.0)
    interval_seconds: tuple[float, float] = (0.8, 2.0)
    snr_db: float | None = None      # None renders noise-free audio
    sample_rate: int = SAMPLE_RATE
    # Deterministic long-tail construction: carve one inject_seconds interval
    # of inject_symbol into the middle of every inject_every-th track.
    inject_symbol: str | None = None
    inject_seconds: float = 1.0
    inject_every: int = 1

    def __post_init__(self):
        if not self.palette:
            raise ValueError("palette must list at least one chord symbol")
        if self.palette_weights is not None and len(self.palette_weights) != len(self.palette):
            raise ValueError("palette_weights must match the palette length")
        if self.inject_every < 1 or self.inject_seconds <= 0:
            raise ValueError("inject_every must be >= 1 and inject_seconds positive")


@dataclass(frozen=True)
class SynthTrack:
    track_id: str
    clip: AudioClip
    intervals: list[ChordInterval]
    spec: CqtSpectrogram            # dB-scaled
    labels: FrameLabels


def render_chord_tone(symbol: str, duration: float, sample_rate: int = SAMPLE_RATE,
                      amplitude: float = 0.5) -> np.ndarray:
    """Equal-amplitude sinusoids at the chord's pitch classes, octaves 2-5."""
    chord = parse_chord_symbol(symbol)
    pcs = sorted(pitch_classes(chord))
    n = int(round(duration * sample_rate))
    if not pcs:
        return np.zeros(n)
    t = np.arange(n) / sample_rate
    out = np.zeros(n)
    freqs = [FMIN_HZ * 2.0 ** (octave - 1 + pc / 12.0)
             for octave in (2, 3, 4, 5) for pc in pcs]
    for freq in freqs:
        out += np.sin(2.0 * np.pi * freq * t)
    return amplitude * out / len(freqs)


def _carve(raw: list[tuple[float, float, str]], start: float, end: float,
           symbol: str) -> list[tuple[float, float, str]]:
    """Overwrite [start, end) of a label timeline with one interval."""
    out: list[tuple[float, float, str]] = []
    inserted = False
    for s, e, sym in raw:
        if e <= start + 1e-9 or s >= end - 1e-9:
            out.append((s, e, sym))
            continue
        if s < start - 1e-9:
            out.append((s, start, sym))
        if not inserted:
            out.append((start, end, symbol))
            inserted = True
        if e > end + 1e-9:
            out.append((end, e, sym))
    if not inserted:
        out.append((start, end, symbol))
        out.sort(key=lambda iv: iv[0])
    merged: list[tuple[float, float, str]] = []
    for s, e, sym in out:
        if merged and merged[-1][2] == sym and abs(merged[-1][1] - s) < 1e-9:
            merged[-1] = (merged[-1][0], e, sym)
        else:
            merged.append((s, e, sym))
    return merged


def make_track(track_id: str, config: SynthConfig, rng: np.random.Generator,
               vocab: ChordVocabulary, inject: bool = False) -> SynthTrack:
    lo, hi = config.track_seconds
    length = float(rng.uniform(lo, hi))
    n_samples = int(round(length * config.sample_rate))

    weights = None
    if config.palette_weights is not None:
        weights = np.asarray(config.palette_weights, dtype=np.float64)
        weights = weights / weights.sum()

    cursor = 0.0
    raw: list[tuple[float, float, str]] = []
    while cursor < length:
        dur = float(rng.uniform(*config.interval_seconds))
        end = min(cursor + dur, length)
        symbol = str(rng.choice(config.palette, p=weights))
        if raw and raw[-1][2] == symbol:
            raw[-1] = (raw[-1][0], end, symbol)
        else:
            raw.append((cursor, end, symbol))
        cursor = end

    if inject and config.inject_symbol is not None:
        half = min(config.inject_seconds, length) / 2.0
        raw = _carve(raw, length / 2.0 - half, length / 2.0 + half,
                     config.inject_symbol)

    audio = np.concatenate([
        render_chord_tone(sym, end - start, config.sample_rate)
        for start, end, sym in raw]) if raw else np.zeros(0)
    audio = audio[:n_samples]
    if len(audio) < n_samples:
        audio = np.pad(audio, (0, n_samples - len(audio)))
    if config.snr_db is not None:
        signal_rms = np.sqrt(np.mean(audio ** 2)) or 1.0
        sigma = signal_rms / 10.0 ** (config.snr_db / 20.0)
        audio = audio + rng.normal(0.0, sigma, size=audio.shape)

    clip = AudioClip(audio, config.sample_rate)
    spec = to_db(compute_cqt(clip))
    # Stretch the final interval past the last frame center so every frame
    # carries a chord label.
    frames = frame_count_for(n_samples, HOP_LENGTH)
    covered_end = frames / spec.frame_rate
    intervals = [ChordInterval(start, end, sym) for start, end, sym in raw]
    if intervals and intervals[-1].end < covered_end:
        last = intervals[-1]
        intervals[-1] = ChordInterval(last.start, covered_end, last.label)
    labels = align_labels_to_frames(intervals, frames, spec.frame_rate, vocab)
    return SynthTrack(track_id, clip, intervals, spec, labels)


def synth_dataset(config: SynthConfig, seed: int,
                  vocab: ChordVocabulary) -> list[SynthTrack]:
    """Deterministic list of rendered tracks with features and frame labels."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5159]))
    inject_any = config.inject_symbol is not None
    return [make_track(f"synth{i:03d}", config, rng, vocab,
                       inject=inject_any and i % config.inject_every == 0)
            for i in range(config.num_tracks)]
