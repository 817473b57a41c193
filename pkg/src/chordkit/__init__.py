"""Large-vocabulary audio chord recognition toolkit.

Structured chord labels, constant-Q features, a conformer encoder with
hand-written gradients, class-reweighted training, CRF decoding, and
chord-recognition metrics, exposed as a library plus a batch CLI.
"""

__version__ = "0.1.0"

from .chords import (
    ChordInterval,
    ChordVocabulary,
    StructuredChord,
    compare,
    default_vocabulary,
    format_chord_symbol,
    parse_chord_symbol,
    pitch_classes,
    transpose,
)
from .features import AudioClip, CqtSpectrogram, FrameLabels

__all__ = [
    "__version__",
    "StructuredChord",
    "ChordInterval",
    "ChordVocabulary",
    "parse_chord_symbol",
    "format_chord_symbol",
    "transpose",
    "pitch_classes",
    "compare",
    "default_vocabulary",
    "AudioClip",
    "CqtSpectrogram",
    "FrameLabels",
]
