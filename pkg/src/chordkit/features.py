"""Audio front end: constant-Q spectrograms, dB scaling, pitch-shift
augmentation on the spectrogram, and frame-level label alignment.

The analysis grid is fixed: 22,050 Hz audio, hop 512 (~43.07 frames/s),
252 log-spaced bins covering C1 (inclusive) to C8 (exclusive) at 36 bins
per octave. Each bin is a windowed DFT at its center frequency with a
constant quality factor, computed directly per bin; no kernel tricks.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .chords import ChordInterval, ChordVocabulary, StructuredChord, resolve_label, transpose

__all__ = [
    "AudioClip",
    "CqtSpectrogram",
    "FrameLabels",
    "FeatureFileError",
    "SAMPLE_RATE",
    "HOP_LENGTH",
    "N_BINS",
    "BINS_PER_OCTAVE",
    "FMIN_HZ",
    "DB_FLOOR",
    "bin_frequencies",
    "frame_count_for",
    "compute_cqt",
    "amplitude_to_db",
    "to_db",
    "pitch_shift_cqt",
    "align_labels_to_frames",
    "transpose_labels",
    "write_features",
    "read_features",
    "load_wav",
    "save_wav",
]

SAMPLE_RATE = 22050
HOP_LENGTH = 512
N_BINS = 252
BINS_PER_OCTAVE = 36
FMIN_HZ = 32.7032        # note C1
DB_FLOOR = -80.0
SHIFT_RANGE = (-5, 6)    # semitones, inclusive

_Q = 1.0 / (2.0 ** (1.0 / BINS_PER_OCTAVE) - 1.0)
_MAX_WINDOW = 16384
_FRAME_CHUNK = 256


class FeatureFileError(Exception):
    """Feature file is corrupt, truncated, or from another format version."""


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class CqtSpectrogram:
    """Time x frequency matrix with its analysis metadata.

    ``scale`` is "magnitude" straight out of the transform and "db" after
    decibel conversion; dB data lives in [-80, 0] as float32. ``shift``
    records how many semitones of spectrogram-domain augmentation produced
    this matrix (0 for unshifted).
    """

    data: np.ndarray
    sample_rate: int = SAMPLE_RATE
    hop_length: int = HOP_LENGTH
    shift: int = 0
    scale: str = "db"

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[1] != N_BINS:
            raise ValueError(f"expected [T x {N_BINS}] data, got {self.data.shape}")
        if self.scale == "db":
            lo, hi = float(self.data.min(initial=DB_FLOOR)), float(self.data.max(initial=DB_FLOOR))
            if lo < DB_FLOOR - 1e-6 or hi > 1e-6:
                raise ValueError(f"dB data outside [{DB_FLOOR}, 0]: [{lo}, {hi}]")

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop_length

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class FrameLabels:
    """Per-frame chord supervision: structured labels plus vocabulary ids."""

    chords: tuple[StructuredChord, ...]
    ids: np.ndarray

    def __post_init__(self):
        if len(self.chords) != len(self.ids):
            raise ValueError("chords and ids must have equal length")

    def __len__(self) -> int:
        return len(self.ids)


def bin_frequencies() -> np.ndarray:
    """Center frequency of every bin: FMIN_HZ * 2**(k/36)."""
    return FMIN_HZ * 2.0 ** (np.arange(N_BINS) / BINS_PER_OCTAVE)


def frame_count_for(num_samples: int, hop_length: int = HOP_LENGTH) -> int:
    """Frames produced by centered analysis: floor(n / hop) + 1."""
    return num_samples // hop_length + 1


def _window_length(freq: float, sample_rate: int) -> int:
    return min(int(np.ceil(_Q * sample_rate / freq)), _MAX_WINDOW)


def compute_cqt(clip: AudioClip) -> CqtSpectrogram:
    """Magnitude constant-Q spectrogram of a clip.

    Each bin k applies a Hann-windowed DFT at f_k = FMIN_HZ * 2**(k/36) with
    window length ceil(Q * sr / f_k) capped at 16384 samples, hopped every
    512 samples with centered frames. Output is amplitude-normalized per bin
    (a full-scale sine at a bin's center frequency reads ~1.0 there).
    """
    x = np.asarray(clip.samples, dtype=np.float64)
    sr = clip.sample_rate
    freqs = bin_frequencies()
    min_len = _window_length(freqs[0], sr)
    if len(x) < min_len:
        raise ValueError(
            f"clip of {len(x)} samples is shorter than the lowest bin's "
            f"analysis window ({min_len} samples)")

    hop = HOP_LENGTH
    n_frames = frame_count_for(len(x), hop)
    pad = _MAX_WINDOW // 2 + 1
    xp = np.concatenate([np.zeros(pad), x, np.zeros(pad + _MAX_WINDOW)])
    centers = np.arange(n_frames) * hop + pad

    out = np.empty((n_frames, N_BINS), dtype=np.float64)
    for k, fk in enumerate(freqs):
        nk = _window_length(fk, sr)
        n = np.arange(nk)
        window = np.hanning(nk)
        phase = 2.0 * np.pi * fk * (n - (nk - 1) / 2.0) / sr
        ker_cos = window * np.cos(phase)
        ker_sin = window * np.sin(phase)
        norm = 2.0 / window.sum()
        starts = centers - nk // 2
        for lo in range(0, n_frames, _FRAME_CHUNK):
            hi = min(lo + _FRAME_CHUNK, n_frames)
            seg = xp[starts[lo:hi, None] + n[None, :]]
            out[lo:hi, k] = norm * np.hypot(seg @ ker_cos, seg @ ker_sin)
    return CqtSpectrogram(out, sample_rate=sr, hop_length=hop, shift=0, scale="magnitude")


def amplitude_to_db(spec: np.ndarray) -> np.ndarray:
    """20*log10(x / max(x)) clamped at -80 dB; all-zero input maps to -80."""
    mags = np.asarray(spec, dtype=np.float64)
    if mags.size and mags.min() < 0:
        raise ValueError("magnitudes must be non-negative")
    peak = mags.max(initial=0.0)
    if peak == 0.0:
        return np.full(mags.shape, DB_FLOOR, dtype=np.float32)
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mags / peak)
    return np.maximum(db, DB_FLOOR).astype(np.float32)


def to_db(spec: CqtSpectrogram) -> CqtSpectrogram:
    """dB-scaled copy of a magnitude spectrogram."""
    if spec.scale == "db":
        return spec
    return replace(spec, data=amplitude_to_db(spec.data), scale="db")


def pitch_shift_cqt(spec: CqtSpectrogram, semitones: int) -> CqtSpectrogram:
    """Shift a dB spectrogram by whole semitones along the frequency axis.

    36 bins/octave means 3 bins per semitone; vacated bins are filled with
    the -80 dB floor. Valid shifts are -5..+6 semitones.
    """
    if not SHIFT_RANGE[0] <= semitones <= SHIFT_RANGE[1]:
        raise ValueError(f"shift {semitones} outside {SHIFT_RANGE[0]}..{SHIFT_RANGE[1]} semitones")
    if spec.scale != "db":
        raise ValueError("pitch_shift_cqt expects a dB-scaled spectrogram")
    if semitones == 0:
        return spec
    bins = 3 * semitones
    shifted = np.full_like(spec.data, DB_FLOOR)
    if bins > 0:
        shifted[:, bins:] = spec.data[:, :-bins]
    else:
        shifted[:, :bins] = spec.data[:, -bins:]
    return replace(spec, data=shifted, shift=spec.shift + semitones)


def _validate_intervals(intervals: list[ChordInterval]) -> None:
    for prev, cur in zip(intervals, intervals[1:]):
        if cur.start < prev.end - 1e-9:
            raise ValueError(
                f"intervals overlap: [{prev.start}, {prev.end}) and [{cur.start}, {cur.end})")
        if cur.start < prev.start:
            raise ValueError("intervals must be sorted by start time")


def align_labels_to_frames(intervals: list[ChordInterval], frame_count: int,
                           frame_rate: float, vocab: ChordVocabulary) -> FrameLabels:
    """Label every frame by the interval covering its center time.

    Frame t has center (t + 0.5) / frame_rate. Intervals are half-open, so a
    boundary landing exactly on a frame center assigns the frame to the later
    interval. Uncovered frames are the no-chord label.
    """
    _validate_intervals(intervals)
    starts = np.array([iv.start for iv in intervals], dtype=np.float64)
    ends = np.array([iv.end for iv in intervals], dtype=np.float64)
    chords = [resolve_label(iv.label, vocab) for iv in intervals]

    no_chord_id = vocab.id_of(StructuredChord(0, 0, 0, 0, 0, 0))
    centers = (np.arange(frame_count) + 0.5) / frame_rate
    out_chords: list[StructuredChord] = []
    ids = np.empty(frame_count, dtype=np.uint16)
    idx = np.searchsorted(starts, centers, side="right") - 1
    for t, (center, i) in enumerate(zip(centers, idx)):
        if i >= 0 and center < ends[i]:
            chord = chords[i]
            ids[t] = vocab.id_of(chord)
        else:
            chord = vocab.chords[no_chord_id]
            ids[t] = no_chord_id
        out_chords.append(chord)
    return FrameLabels(tuple(out_chords), ids)


def transpose_labels(labels: FrameLabels, semitones: int,
                     vocab: ChordVocabulary) -> FrameLabels:
    """Transpose every frame label; ids are re-looked-up in the vocabulary."""
    moved = tuple(transpose(c, semitones) for c in labels.chords)
    ids = np.array([vocab.id_of(c) for c in moved], dtype=np.uint16)
    return FrameLabels(moved, ids)


_MAGIC = b"CQTF"
_VERSION = 1
_HEADER = struct.Struct("<4sHIIHIb")


def write_features(path: str | Path, spec: CqtSpectrogram, labels: FrameLabels,
                   vocab_hash: bytes) -> None:
    """Serialize a dB spectrogram plus frame labels to the binary format."""
    if spec.scale != "db":
        raise ValueError("feature files store dB-scaled spectrograms")
    if spec.num_frames != len(labels):
        raise ValueError("label count must match frame count")
    if len(vocab_hash) != 32:
        raise ValueError("vocab_hash must be a 32-byte digest")
    header = _HEADER.pack(_MAGIC, _VERSION, spec.sample_rate, spec.hop_length,
                          N_BINS, spec.num_frames, spec.shift)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(spec.data, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(labels.ids, dtype="<u2").tobytes())
        fh.write(vocab_hash)


def read_features(path: str | Path,
                  vocab: ChordVocabulary | None = None
                  ) -> tuple[CqtSpectrogram, FrameLabels | np.ndarray, bytes]:
    """Read a feature file back; the inverse of write_features.

    With a vocabulary the label block is returned as FrameLabels and the
    stored vocabulary hash is checked; without one the raw id vector comes
    back and hash checking is the caller's job.
    """
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise FeatureFileError(f"{path}: truncated header")
    magic, version, sr, hop, bins, n_frames, shift = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise FeatureFileError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise FeatureFileError(f"{path}: version {version}, expected {_VERSION}")
    if bins != N_BINS:
        raise FeatureFileError(f"{path}: {bins} bins, expected {N_BINS}")
    data_bytes = 4 * n_frames * bins
    label_bytes = 2 * n_frames
    expected = _HEADER.size + data_bytes + label_bytes + 32
    if len(blob) != expected:
        raise FeatureFileError(f"{path}: {len(blob)} bytes, expected {expected}")
    offset = _HEADER.size
    data = np.frombuffer(blob, dtype="<f4", count=n_frames * bins,
                         offset=offset).reshape(n_frames, bins).copy()
    offset += data_bytes
    ids = np.frombuffer(blob, dtype="<u2", count=n_frames, offset=offset).copy()
    stored_hash = blob[offset + label_bytes:]
    spec = CqtSpectrogram(data, sample_rate=sr, hop_length=hop, shift=shift, scale="db")
    if vocab is None:
        return spec, ids, stored_hash
    if stored_hash != vocab.content_hash():
        raise FeatureFileError(f"{path}: vocabulary hash mismatch")
    chords = tuple(vocab.chords[i] for i in ids)
    return spec, FrameLabels(chords, ids), stored_hash


def load_wav(path: str | Path) -> AudioClip:
    """Read a 16-bit or float PCM WAV file; stereo is averaged to mono."""
    sr, raw = wavfile.read(path)
    data = np.asarray(raw)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample format {data.dtype}")
    return AudioClip(samples, sr)


def save_wav(path: str | Path, clip: AudioClip) -> None:
    scaled = np.clip(clip.samples, -1.0, 1.0)
    wavfile.write(path, clip.sample_rate, (scaled * 32767).astype(np.int16))
