"""Structured chord labels: parsing, formatting, transposition, comparison.

A chord is encoded as six components: a fused root+triad class, an absolute
bass pitch class, and four extension slots (7th, 9th, 11th, 13th). The
component vocabularies have sizes (73, 13, 4, 4, 3, 3); "N" is index 0 in
every slot and the all-N tuple is the no-chord label.

Text labels follow root:quality(/bass) notation, e.g. ``C:maj7``,
``A:min7/b3``, ``N``. Slash basses written as scale degrees are resolved to
absolute pitch classes at parse time.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "ChordError",
    "ChordParseError",
    "UnsupportedQualityError",
    "VocabularyError",
    "AnnotationError",
    "StructuredChord",
    "ChordInterval",
    "ChordVocabulary",
    "NO_CHORD",
    "COMPONENT_SIZES",
    "PITCH_NAMES",
    "TRIAD_NAMES",
    "parse_chord_symbol",
    "format_chord_symbol",
    "transpose",
    "pitch_classes",
    "compare",
    "METRIC_KINDS",
    "load_vocabulary",
    "default_vocabulary",
    "default_vocabulary_path",
    "read_annotations",
    "write_annotations",
]


class ChordError(Exception):
    """Base class for chord label errors."""


class ChordParseError(ChordError):
    """Malformed chord text; the message names the offending token."""


class UnsupportedQualityError(ChordParseError):
    """Syntactically valid chord whose quality has no structured encoding."""


class VocabularyError(ChordError):
    """Vocabulary file failed validation."""


class AnnotationError(ChordError):
    """Annotation file failed validation."""


PITCH_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")
_NATURAL_PC = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}

TRIAD_NAMES = ("maj", "min", "sus4", "sus2", "dim", "aug")
_TRIAD_INTERVALS = {
    "maj": (0, 4, 7),
    "min": (0, 3, 7),
    "sus4": (0, 5, 7),
    "sus2": (0, 2, 7),
    "dim": (0, 3, 6),
    "aug": (0, 4, 8),
}
# Pitch-class offset of the degree that stands in for the third; sus chords
# compare on their replacement degree.
_THIRD_OFFSET = {"maj": 4, "min": 3, "sus4": 5, "sus2": 2, "dim": 3, "aug": 4}

SEVENTH_NAMES = ("N", "7", "b7", "bb7")
NINTH_NAMES = ("N", "9", "#9", "b9")
ELEVENTH_NAMES = ("N", "11", "#11")
THIRTEENTH_NAMES = ("N", "13", "b13")

# bb7 is the major sixth; sixth chords are encoded through the 7th slot.
_SEVENTH_PC = {1: 11, 2: 10, 3: 9}
_NINTH_PC = {1: 2, 2: 3, 3: 1}
_ELEVENTH_PC = {1: 5, 2: 6}
_THIRTEENTH_PC = {1: 9, 2: 8}

COMPONENT_SIZES = (73, 13, 4, 4, 3, 3)


def component_class_names() -> tuple[tuple[str, ...], ...]:
    """Human-readable class labels for each of the six components."""
    root_triad = ("N",) + tuple(f"{root}:{triad}" for root in PITCH_NAMES
                                for triad in TRIAD_NAMES)
    bass = ("N",) + PITCH_NAMES
    return (root_triad, bass, SEVENTH_NAMES, NINTH_NAMES,
            ELEVENTH_NAMES, THIRTEENTH_NAMES)

METRIC_KINDS = ("root", "thirds", "majmin", "triads", "sevenths", "tetrads", "mirex")


@dataclass(frozen=True, slots=True)
class StructuredChord:
    """Six-component chord encoding.

    root_triad: 0 is N, otherwise 1 + 6*root + triad with triads ordered
    (maj, min, sus4, sus2, dim, aug). bass: 0 is N, otherwise pitch class + 1.
    The extension slots index SEVENTH_NAMES, NINTH_NAMES, ELEVENTH_NAMES and
    THIRTEENTH_NAMES respectively.
    """

    root_triad: int
    bass: int
    seventh: int
    ninth: int
    eleventh: int
    thirteenth: int

    def __post_init__(self):
        values = self.as_tuple()
        for value, size in zip(values, COMPONENT_SIZES):
            if not 0 <= value < size:
                raise ValueError(f"component value {value} outside vocabulary of size {size}")
        if self.root_triad == 0 and any(values[1:]):
            raise ValueError("no-chord label must be all-N")

    def as_tuple(self) -> tuple[int, int, int, int, int, int]:
        return (self.root_triad, self.bass, self.seventh, self.ninth,
                self.eleventh, self.thirteenth)

    @property
    def is_no_chord(self) -> bool:
        return self.root_triad == 0

    @property
    def root(self) -> int | None:
        """Root pitch class, or None for the no-chord label."""
        if self.root_triad == 0:
            return None
        return (self.root_triad - 1) // 6

    @property
    def triad(self) -> str | None:
        if self.root_triad == 0:
            return None
        return TRIAD_NAMES[(self.root_triad - 1) % 6]


NO_CHORD = StructuredChord(0, 0, 0, 0, 0, 0)


@dataclass(frozen=True, slots=True)
class ChordInterval:
    """One annotation row: [start, end) seconds labelled with a chord symbol."""

    start: float
    end: float
    label: str

    def __post_init__(self):
        if not self.end > self.start:
            raise ValueError(f"interval end {self.end} must exceed start {self.start}")

    @property
    def duration(self) -> float:
        return self.end - self.start


# Quality templates: name -> (triad, seventh, ninth, eleventh, thirteenth).
# "13" follows the convention that thirteenth chords carry the flat seventh
# and the ninth but omit the eleventh (C13 = C-E-G-Bb-D-A); sixth chords are
# the bb7 encoding (C6 = C-E-G-A, no seventh).
_QUALITIES: dict[str, tuple[str, int, int, int, int]] = {
    "maj": ("maj", 0, 0, 0, 0),
    "min": ("min", 0, 0, 0, 0),
    "dim": ("dim", 0, 0, 0, 0),
    "aug": ("aug", 0, 0, 0, 0),
    "sus4": ("sus4", 0, 0, 0, 0),
    "sus2": ("sus2", 0, 0, 0, 0),
    "7": ("maj", 2, 0, 0, 0),
    "maj7": ("maj", 1, 0, 0, 0),
    "min7": ("min", 2, 0, 0, 0),
    "dim7": ("dim", 3, 0, 0, 0),
    "hdim7": ("dim", 2, 0, 0, 0),
    "minmaj7": ("min", 1, 0, 0, 0),
    "maj6": ("maj", 3, 0, 0, 0),
    "min6": ("min", 3, 0, 0, 0),
    "9": ("maj", 2, 1, 0, 0),
    "maj9": ("maj", 1, 1, 0, 0),
    "min9": ("min", 2, 1, 0, 0),
    "11": ("maj", 2, 1, 1, 0),
    "min11": ("min", 2, 1, 1, 0),
    "13": ("maj", 2, 1, 0, 1),
    "maj13": ("maj", 1, 1, 0, 1),
    "min13": ("min", 2, 1, 0, 1),
    "sus4(b7)": ("sus4", 2, 0, 0, 0),
}

_QUALITY_ALIASES = {
    "": "maj",
    "M": "maj",
    "m": "min",
    "6": "maj6",
    "m7": "min7",
    "m6": "min6",
    "sus": "sus4",
    "dom7": "7",
    "minmaj": "minmaj7",
    "half_dim7": "hdim7",
    "m7b5": "hdim7",
}

# Degree string -> semitones above the root (before b/# modifiers).
_DEGREE_SEMITONES = {1: 0, 2: 2, 3: 4, 4: 5, 5: 7, 6: 9, 7: 11,
                     8: 12, 9: 14, 10: 16, 11: 17, 12: 19, 13: 21}

# Parenthesised degree additions that map onto an extension slot.
_ADDITION_SLOTS = {
    "7": ("seventh", 1), "b7": ("seventh", 2), "bb7": ("seventh", 3),
    "6": ("seventh", 3),
    "9": ("ninth", 1), "#9": ("ninth", 2), "b9": ("ninth", 3),
    "11": ("eleventh", 1), "#11": ("eleventh", 2),
    "13": ("thirteenth", 1), "b13": ("thirteenth", 2),
}

_ROOT_RE = re.compile(r"^([A-G])([b#]*)$")
_DEGREE_RE = re.compile(r"^(\*?)([b#]*)(\d+)$")


def _parse_pitch(token: str) -> int:
    m = _ROOT_RE.match(token)
    if m is None:
        raise ChordParseError(f"invalid pitch name {token!r}")
    pc = _NATURAL_PC[m.group(1)]
    for mod in m.group(2):
        pc += 1 if mod == "#" else -1
    return pc % 12


def _parse_degree(token: str, allow_omission: bool = False) -> tuple[bool, int]:
    """Return (is_omission, semitone offset) for a degree token like 'b7'."""
    m = _DEGREE_RE.match(token)
    if m is None:
        raise ChordParseError(f"invalid degree token {token!r}")
    omit, mods, num = m.group(1) == "*", m.group(2), int(m.group(3))
    if omit and not allow_omission:
        raise ChordParseError(f"omission {token!r} not allowed here")
    if num not in _DEGREE_SEMITONES:
        raise ChordParseError(f"degree {num} out of range in {token!r}")
    semis = _DEGREE_SEMITONES[num]
    for mod in mods:
        semis += 1 if mod == "#" else -1
    return omit, semis % 12


def _split_symbol(text: str) -> tuple[str, str, str]:
    """Split 'root:quality/bass' into its three raw parts."""
    if not text or text != text.strip():
        raise ChordParseError(f"malformed chord symbol {text!r}")
    rest = text
    bass = ""
    if "/" in rest:
        rest, bass = rest.split("/", 1)
        if not bass:
            raise ChordParseError(f"empty bass in {text!r}")
    if ":" in rest:
        root, quality = rest.split(":", 1)
    else:
        root, quality = rest, ""
    if not root:
        raise ChordParseError(f"missing root in {text!r}")
    return root, quality, bass


def _encode(root: int, quality: str, bass_token: str) -> StructuredChord:
    base = quality
    additions: list[str] = []
    if "(" in quality and quality not in _QUALITIES:
        if not quality.endswith(")"):
            raise ChordParseError(f"unbalanced parentheses in quality {quality!r}")
        base, inner = quality[:-1].split("(", 1)
        additions = [tok.strip() for tok in inner.split(",") if tok.strip()]

    base = _QUALITY_ALIASES.get(base, base)
    if base not in _QUALITIES:
        raise UnsupportedQualityError(f"unsupported quality {quality!r}")
    triad, seventh, ninth, eleventh, thirteenth = _QUALITIES[base]
    slots = {"seventh": seventh, "ninth": ninth, "eleventh": eleventh,
             "thirteenth": thirteenth}
    for token in additions:
        if token not in _ADDITION_SLOTS:
            raise UnsupportedQualityError(
                f"degree {token!r} in {quality!r} has no extension slot")
        slot, value = _ADDITION_SLOTS[token]
        slots[slot] = value

    if bass_token:
        if bass_token[0] in _NATURAL_PC:
            bass_pc = _parse_pitch(bass_token)
        else:
            _, semis = _parse_degree(bass_token)
            bass_pc = (root + semis) % 12
    else:
        bass_pc = root

    return StructuredChord(
        root_triad=1 + 6 * root + TRIAD_NAMES.index(triad),
        bass=bass_pc + 1,
        seventh=slots["seventh"],
        ninth=slots["ninth"],
        eleventh=slots["eleventh"],
        thirteenth=slots["thirteenth"],
    )


def parse_chord_symbol(text: str) -> StructuredChord:
    """Parse root:quality(/bass) text into a StructuredChord.

    The bass defaults to the root when no slash is present. Raises
    ChordParseError for malformed text and UnsupportedQualityError for
    qualities with no structured encoding.
    """
    if text == "N":
        return NO_CHORD
    root_tok, quality, bass_tok = _split_symbol(text)
    root = _parse_pitch(root_tok)
    return _encode(root, quality, bass_tok)


# Canonical degree names for formatting a bass offset, chosen so that
# parse(format(chord)) round-trips.
_OFFSET_DEGREE = {0: "1", 1: "b2", 2: "2", 3: "b3", 4: "3", 5: "4",
                  6: "b5", 7: "5", 8: "b6", 9: "6", 10: "b7", 11: "7"}

_QUALITY_BY_COMPONENTS = {
    (TRIAD_NAMES.index(t), s, n, e, th): name
    for name, (t, s, n, e, th) in _QUALITIES.items()
}


def format_chord_symbol(chord: StructuredChord) -> str:
    """Canonical text for a chord; inverse of parse on vocabulary entries."""
    if chord.is_no_chord:
        return "N"
    root = chord.root
    triad = (chord.root_triad - 1) % 6
    key = (triad, chord.seventh, chord.ninth, chord.eleventh, chord.thirteenth)
    quality = _QUALITY_BY_COMPONENTS.get(key)
    if quality is None:
        # Extension combination outside the named templates: spell the
        # extensions explicitly on top of the bare triad.
        extras = []
        for value, names in ((chord.seventh, SEVENTH_NAMES),
                             (chord.ninth, NINTH_NAMES),
                             (chord.eleventh, ELEVENTH_NAMES),
                             (chord.thirteenth, THIRTEENTH_NAMES)):
            if value:
                extras.append(names[value])
        quality = TRIAD_NAMES[triad] + "(" + ",".join(extras) + ")" if extras \
            else TRIAD_NAMES[triad]
    text = f"{PITCH_NAMES[root]}:{quality}"
    bass_pc = chord.bass - 1
    if bass_pc != root:
        text += "/" + _OFFSET_DEGREE[(bass_pc - root) % 12]
    return text


def transpose(chord: StructuredChord, semitones: int) -> StructuredChord:
    """Shift root and bass by semitones (mod 12); N maps to N."""
    if chord.is_no_chord:
        return chord
    k = semitones % 12
    root = (chord.root + k) % 12
    triad = (chord.root_triad - 1) % 6
    bass = ((chord.bass - 1 + k) % 12) + 1
    return StructuredChord(1 + 6 * root + triad, bass, chord.seventh,
                           chord.ninth, chord.eleventh, chord.thirteenth)


def pitch_classes(chord: StructuredChord) -> frozenset[int]:
    """Absolute pitch classes implied by root+triad and the extensions.

    The bass is not included; the no-chord label yields the empty set.
    """
    if chord.is_no_chord:
        return frozenset()
    root = chord.root
    pcs = {(root + iv) % 12 for iv in _TRIAD_INTERVALS[chord.triad]}
    for value, table in ((chord.seventh, _SEVENTH_PC), (chord.ninth, _NINTH_PC),
                         (chord.eleventh, _ELEVENTH_PC),
                         (chord.thirteenth, _THIRTEENTH_PC)):
        if value:
            pcs.add((root + table[value]) % 12)
    return frozenset(pcs)


def _majmin_class(chord: StructuredChord):
    """Projection onto {maj, min, N}; None when outside the projection."""
    if chord.is_no_chord:
        return "N"
    if chord.triad in ("maj", "min"):
        return (chord.root, chord.triad)
    return None


def _sevenths_class(chord: StructuredChord):
    """Projection onto {maj, min, maj7, min7, 7, N}; None when outside."""
    if chord.is_no_chord:
        return "N"
    if chord.ninth or chord.eleventh or chord.thirteenth:
        return None
    triad, seventh = chord.triad, chord.seventh
    if triad == "maj" and seventh in (0, 1, 2):
        return (chord.root, "maj", seventh)
    if triad == "min" and seventh in (0, 2):
        return (chord.root, "min", seventh)
    return None


def in_metric_vocabulary(metric: str, chord: StructuredChord) -> bool:
    """Whether a reference chord participates in scoring for this metric.

    majmin and sevenths exclude reference chords outside their projected
    vocabularies; every other metric scores all chords.
    """
    if metric == "majmin":
        return _majmin_class(chord) is not None
    if metric == "sevenths":
        return _sevenths_class(chord) is not None
    if metric not in METRIC_KINDS:
        raise ValueError(f"unknown metric kind {metric!r}")
    return True


def compare(metric: str, reference: StructuredChord, estimate: StructuredChord) -> bool:
    """Metric-family chord match following the usual evaluation conventions.

    N matches only N in every family (including mirex, where the pitch-class
    overlap rule is otherwise undefined for empty sets).
    """
    ref, est = reference, estimate
    if metric == "root":
        return ref.root == est.root
    if metric == "thirds":
        if ref.is_no_chord or est.is_no_chord:
            return ref.is_no_chord == est.is_no_chord
        return (ref.root == est.root
                and (ref.root + _THIRD_OFFSET[ref.triad]) % 12
                == (est.root + _THIRD_OFFSET[est.triad]) % 12)
    if metric == "majmin":
        # Projection equality; frames whose reference chord lies outside the
        # projection are excluded from scoring upstream, so compare stays
        # reflexive for every chord.
        return _majmin_class(ref) == _majmin_class(est)
    if metric == "triads":
        return ref.root_triad == est.root_triad
    if metric == "sevenths":
        return _sevenths_class(ref) == _sevenths_class(est)
    if metric == "tetrads":
        return ref.root_triad == est.root_triad and ref.seventh == est.seventh
    if metric == "mirex":
        if ref.is_no_chord or est.is_no_chord:
            return ref.is_no_chord == est.is_no_chord
        return len(pitch_classes(ref) & pitch_classes(est)) >= 3
    raise ValueError(f"unknown metric kind {metric!r}")


class ChordVocabulary:
    """Ordered decode vocabulary with bidirectional symbol/tuple lookup."""

    def __init__(self, symbols: list[str]):
        self.symbols: list[str] = []
        self.chords: list[StructuredChord] = []
        self._by_symbol: dict[str, int] = {}
        self._by_tuple: dict[tuple, int] = {}
        for symbol in symbols:
            chord = parse_chord_symbol(symbol)
            if symbol in self._by_symbol:
                raise VocabularyError(f"duplicate symbol {symbol!r}")
            if chord.as_tuple() in self._by_tuple:
                raise VocabularyError(
                    f"symbol {symbol!r} duplicates the encoding of "
                    f"{self.symbols[self._by_tuple[chord.as_tuple()]]!r}")
            self._by_symbol[symbol] = len(self.symbols)
            self._by_tuple[chord.as_tuple()] = len(self.symbols)
            self.symbols.append(symbol)
            self.chords.append(chord)
        self._pcs = [pitch_classes(c) for c in self.chords]
        self._complexity = [sum(1 for v in c.as_tuple() if v) for c in self.chords]
        self._snap_cache: dict[frozenset, int] = {}

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, chord: StructuredChord) -> bool:
        return chord.as_tuple() in self._by_tuple

    def index_of_symbol(self, symbol: str) -> int:
        return self._by_symbol[symbol]

    def index_of(self, chord: StructuredChord) -> int | None:
        return self._by_tuple.get(chord.as_tuple())

    def snap(self, pcs: frozenset[int]) -> int:
        """Nearest entry by shared pitch-class count.

        Ties prefer fewer non-N components, then the lowest index. The empty
        set snaps to the no-chord entry.
        """
        cached = self._snap_cache.get(pcs)
        if cached is not None:
            return cached
        if not pcs:
            best = self._by_tuple[NO_CHORD.as_tuple()]
        else:
            best, best_key = 0, None
            for idx in range(len(self.symbols)):
                if self.chords[idx].is_no_chord:
                    continue
                key = (-len(pcs & self._pcs[idx]), self._complexity[idx], idx)
                if best_key is None or key < best_key:
                    best, best_key = idx, key
        self._snap_cache[pcs] = best
        return best

    def id_of(self, chord: StructuredChord, snap: bool = True) -> int:
        """Index of a chord, snapping out-of-vocabulary chords when asked."""
        idx = self.index_of(chord)
        if idx is not None:
            return idx
        if not snap:
            raise VocabularyError(f"{format_chord_symbol(chord)!r} not in vocabulary")
        return self.snap(pitch_classes(chord))

    def quality_of(self, index: int) -> str:
        """Quality label with the root factored out, e.g. 'maj7', 'maj/5', 'N'."""
        symbol = self.symbols[index]
        if symbol == "N":
            return "N"
        _, quality, bass = _split_symbol(symbol)
        return quality + ("/" + bass if bass else "")

    def content_hash(self) -> bytes:
        """SHA-256 over the symbol list; embedded in feature files."""
        return hashlib.sha256("\n".join(self.symbols).encode()).digest()


# The shipped template list: 25 qualities/inversions per root plus N.
VOCAB_TEMPLATES = (
    "maj", "min", "dim", "aug", "sus4", "sus2",
    "7", "maj7", "min7", "dim7", "hdim7", "minmaj7",
    "maj6", "min6",
    "9", "maj9", "min9", "11", "min11", "13", "maj13", "min13",
    "sus4(b7)",
    "maj/3", "maj/5",
)


def default_vocabulary_path() -> Path:
    return Path(__file__).parent / "data" / "vocabulary.txt"


_COMMENT_RE = re.compile(r"(^|\s)#.*$")


def load_vocabulary(path: str | Path) -> ChordVocabulary:
    """Load a one-symbol-per-line vocabulary file.

    '#' starts a comment when it opens the line or follows whitespace, so
    sharp note names like C#:maj survive.
    """
    symbols = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = _COMMENT_RE.sub("", raw).strip()
        if not line:
            continue
        if line in seen:
            raise VocabularyError(
                f"{path}:{lineno}: duplicate symbol {line!r} "
                f"(first seen on line {seen[line]})")
        seen[line] = lineno
        try:
            parse_chord_symbol(line)
        except ChordParseError as exc:
            raise VocabularyError(f"{path}:{lineno}: {exc}") from exc
        symbols.append(line)
    return ChordVocabulary(symbols)


_default_vocab: ChordVocabulary | None = None


def default_vocabulary() -> ChordVocabulary:
    """The shipped 301-entry vocabulary (cached)."""
    global _default_vocab
    if _default_vocab is None:
        vocab = load_vocabulary(default_vocabulary_path())
        if len(vocab) != 301:
            raise VocabularyError(
                f"default vocabulary has {len(vocab)} entries, expected 301")
        _default_vocab = vocab
    return _default_vocab


def _pitch_class_set(text: str) -> frozenset[int] | None:
    """Best-effort pitch classes for labels whose quality we cannot encode."""
    try:
        root_tok, quality, _ = _split_symbol(text)
        root = _parse_pitch(root_tok)
    except ChordParseError:
        return None
    base, tokens = quality, []
    if "(" in quality:
        if not quality.endswith(")"):
            return None
        base, inner = quality[:-1].split("(", 1)
        tokens = [t.strip() for t in inner.split(",") if t.strip()]
    base = _QUALITY_ALIASES.get(base, base)
    if base in _QUALITIES:
        triad, seventh, ninth, eleventh, thirteenth = _QUALITIES[base]
        pcs = {iv for iv in _TRIAD_INTERVALS[triad]}
        for value, table in ((seventh, _SEVENTH_PC), (ninth, _NINTH_PC),
                             (eleventh, _ELEVENTH_PC), (thirteenth, _THIRTEENTH_PC)):
            if value:
                pcs.add(table[value])
    elif not base and tokens:
        pcs = set()
    else:
        return None
    try:
        for token in tokens:
            omit, semis = _parse_degree(token, allow_omission=True)
            if omit:
                pcs.discard(semis)
            else:
                pcs.add(semis)
    except ChordParseError:
        return None
    return frozenset((root + s) % 12 for s in pcs)


def resolve_label(text: str, vocab: ChordVocabulary) -> StructuredChord:
    """Parse a label, snapping unsupported qualities to the vocabulary.

    Out-of-vocabulary but encodable chords are returned as-is; snapping to a
    vocabulary id happens when frame ids are assigned. Labels whose pitch
    content cannot be determined at all map to the no-chord label.
    """
    try:
        return parse_chord_symbol(text)
    except UnsupportedQualityError:
        pcs = _pitch_class_set(text)
        if pcs is None:
            return NO_CHORD
        return vocab.chords[vocab.snap(pcs)]
    except ChordParseError:
        pcs = _pitch_class_set(text)
        if pcs is None:
            raise
        return vocab.chords[vocab.snap(pcs)]


def read_annotations(path: str | Path) -> list[ChordInterval]:
    """Read start<TAB>end<TAB>symbol rows; validates ordering and overlap."""
    intervals: list[ChordInterval] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise AnnotationError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
        try:
            start, end = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise AnnotationError(f"{path}:{lineno}: bad time field: {exc}") from exc
        if end <= start:
            raise AnnotationError(f"{path}:{lineno}: end {end} <= start {start}")
        if intervals and start < intervals[-1].end - 1e-9:
            raise AnnotationError(
                f"{path}:{lineno}: interval starting at {start} overlaps previous")
        intervals.append(ChordInterval(start, end, parts[2]))
    return intervals


def write_annotations(path: str | Path, intervals: list[ChordInterval]) -> None:
    with open(path, "w") as fh:
        for iv in intervals:
            fh.write(f"{iv.start:.6f}\t{iv.end:.6f}\t{iv.label}\n")
