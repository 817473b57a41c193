import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chordkit.chords import ChordInterval, parse_chord_symbol, transpose
from chordkit.features import (
    DB_FLOOR,
    FMIN_HZ,
    HOP_LENGTH,
    N_BINS,
    SAMPLE_RATE,
    AudioClip,
    CqtSpectrogram,
    FeatureFileError,
    align_labels_to_frames,
    amplitude_to_db,
    bin_frequencies,
    compute_cqt,
    frame_count_for,
    pitch_shift_cqt,
    read_features,
    to_db,
    transpose_labels,
    write_features,
)


def sine_clip(freq, seconds=1.5, amplitude=0.5):
    t = np.arange(int(seconds * SAMPLE_RATE)) / SAMPLE_RATE
    return AudioClip(amplitude * np.sin(2 * np.pi * freq * t), SAMPLE_RATE)


def mid_frame_argmax(spec):
    """Dominant bin over the middle half of the frames (edges see padding)."""
    T = spec.num_frames
    mid = spec.data[T // 4: 3 * T // 4]
    return int(np.bincount(mid.argmax(axis=1), minlength=N_BINS).argmax())


class TestCqt:
    def test_bin_frequency_law(self):
        freqs = bin_frequencies()
        law = FMIN_HZ * 2.0 ** (np.arange(N_BINS) / 36.0)
        assert np.allclose(freqs, law, rtol=1e-3)

    def test_a4_peaks_at_bin_135(self):
        # A4 sits 45 semitones above C1; 3 bins per semitone.
        assert mid_frame_argmax(compute_cqt(sine_clip(440.0))) == 135

    def test_fmin_peaks_at_bin_0(self):
        assert mid_frame_argmax(compute_cqt(sine_clip(FMIN_HZ))) == 0

    def test_c5_peaks_at_bin_144(self):
        c5 = FMIN_HZ * 2.0 ** 4
        assert mid_frame_argmax(compute_cqt(sine_clip(c5))) == 144

    def test_silence_is_all_zero(self):
        spec = compute_cqt(AudioClip(np.zeros(SAMPLE_RATE), SAMPLE_RATE))
        assert np.all(spec.data == 0.0)

    def test_too_short_clip(self):
        with pytest.raises(ValueError, match="16384"):
            compute_cqt(AudioClip(np.zeros(1000), SAMPLE_RATE))

    def test_frame_count_matches_formula(self):
        n = int(1.5 * SAMPLE_RATE)
        spec = compute_cqt(AudioClip(np.zeros(n), SAMPLE_RATE))
        assert spec.num_frames == frame_count_for(n) == n // HOP_LENGTH + 1

    def test_frame_rate(self):
        spec = compute_cqt(sine_clip(440.0, seconds=1.0))
        assert spec.frame_rate == pytest.approx(43.066, abs=0.01)


class TestAmplitudeToDb:
    def test_max_maps_to_zero(self):
        db = amplitude_to_db(np.array([[1.0, 10.0], [5.0, 2.0]]))
        assert db.max() == 0.0

    def test_tenth_of_max_is_minus_20(self):
        db = amplitude_to_db(np.array([[10.0, 1.0]]))
        assert db[0, 1] == pytest.approx(-20.0, abs=1e-5)

    def test_zero_clamps_to_floor(self):
        db = amplitude_to_db(np.array([[1.0, 0.0]]))
        assert db[0, 1] == DB_FLOOR

    def test_all_zero_input(self):
        db = amplitude_to_db(np.zeros((3, 4)))
        assert np.all(db == DB_FLOOR)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            amplitude_to_db(np.array([[-1.0]]))

    @settings(max_examples=30)
    @given(st.lists(st.floats(0.0, 1e6), min_size=2, max_size=12),
           st.floats(0.5, 100.0))
    def test_monotone_and_scale_invariant(self, values, scale):
        mags = np.array([values])
        db = amplitude_to_db(mags)
        order = np.argsort(mags[0], kind="stable")
        assert np.all(np.diff(db[0][order]) >= 0)
        assert np.array_equal(amplitude_to_db(mags * scale), db)


class TestPitchShift:
    def _db_spec(self):
        return to_db(compute_cqt(sine_clip(440.0)))

    def test_shift_zero_identity(self):
        spec = self._db_spec()
        assert pitch_shift_cqt(spec, 0) is spec

    def test_shift_moves_peak_three_bins(self):
        spec = self._db_spec()
        up = pitch_shift_cqt(spec, 1)
        assert mid_frame_argmax(up) == 138
        assert up.shift == 1

    def test_vacated_bins_filled_with_floor(self):
        up = pitch_shift_cqt(self._db_spec(), 6)
        assert np.all(up.data[:, :18] == DB_FLOOR)

    def test_out_of_range(self):
        spec = self._db_spec()
        for bad in (-6, 7):
            with pytest.raises(ValueError):
                pitch_shift_cqt(spec, bad)

    def test_label_feature_consistency(self, vocab):
        # Shifting features and transposing labels keeps peak-to-root offset.
        chord = parse_chord_symbol("C:maj")
        spec = to_db(compute_cqt(sine_clip(FMIN_HZ * 2 ** (3 + 0 / 12))))  # C4
        base_peak = mid_frame_argmax(spec)
        for k in (-3, 2, 5):
            shifted = pitch_shift_cqt(spec, k)
            moved = transpose(chord, k)
            assert mid_frame_argmax(shifted) - 3 * k == base_peak
            assert (moved.root - chord.root) % 12 == k % 12


class TestAlignment:
    def test_empty_intervals_all_no_chord(self, vocab):
        labels = align_labels_to_frames([], 10, 10.0, vocab)
        assert all(c.is_no_chord for c in labels.chords)

    def test_full_cover(self, vocab):
        iv = [ChordInterval(0.0, 1.0, "C:maj")]
        labels = align_labels_to_frames(iv, 10, 10.0, vocab)
        assert all(not c.is_no_chord for c in labels.chords)

    def test_boundary_on_frame_center_goes_to_later_interval(self, vocab):
        # Frame 1 center sits at 0.15 s with rate 10; boundary exactly there.
        iv = [ChordInterval(0.0, 0.15, "C:maj"), ChordInterval(0.15, 1.0, "D:min")]
        labels = align_labels_to_frames(iv, 5, 10.0, vocab)
        assert labels.chords[0] == parse_chord_symbol("C:maj")
        assert labels.chords[1] == parse_chord_symbol("D:min")

    def test_overlap_rejected(self, vocab):
        iv = [ChordInterval(0.0, 1.0, "C:maj"), ChordInterval(0.5, 2.0, "D:min")]
        with pytest.raises(ValueError, match="overlap"):
            align_labels_to_frames(iv, 5, 10.0, vocab)

    def test_transpose_labels(self, vocab):
        iv = [ChordInterval(0.0, 1.0, "C:maj")]
        labels = align_labels_to_frames(iv, 4, 4.0, vocab)
        moved = transpose_labels(labels, 2, vocab)
        assert moved.chords[0] == parse_chord_symbol("D:maj")
        assert moved.ids[0] == vocab.index_of_symbol("D:maj")


class TestFeatureFiles:
    def _fixture(self, vocab, shift=0):
        rng = np.random.default_rng(3)
        data = rng.uniform(DB_FLOOR, 0, (7, N_BINS)).astype(np.float32)
        spec = CqtSpectrogram(data, shift=shift)
        iv = [ChordInterval(0.0, 1.0, "G:min7")]
        labels = align_labels_to_frames(iv, 7, spec.frame_rate, vocab)
        return spec, labels

    def test_round_trip_bit_exact(self, tmp_path, vocab):
        spec, labels = self._fixture(vocab)
        path = tmp_path / "t.cqtf"
        write_features(path, spec, labels, vocab.content_hash())
        spec2, labels2, digest = read_features(path, vocab)
        assert np.array_equal(spec2.data, spec.data)
        assert np.array_equal(labels2.ids, labels.ids)
        assert spec2.sample_rate == spec.sample_rate
        assert spec2.hop_length == spec.hop_length
        assert digest == vocab.content_hash()

    def test_shift_metadata_round_trip(self, tmp_path, vocab):
        spec, labels = self._fixture(vocab, shift=2)
        path = tmp_path / "t.cqtf"
        write_features(path, spec, labels, vocab.content_hash())
        spec2, _, _ = read_features(path, vocab)
        assert spec2.shift == 2

    def test_corrupt_magic(self, tmp_path, vocab):
        spec, labels = self._fixture(vocab)
        path = tmp_path / "t.cqtf"
        write_features(path, spec, labels, vocab.content_hash())
        blob = bytearray(path.read_bytes())
        blob[:4] = b"XXXX"
        path.write_bytes(bytes(blob))
        with pytest.raises(FeatureFileError, match="magic"):
            read_features(path)

    def test_truncated_file(self, tmp_path, vocab):
        spec, labels = self._fixture(vocab)
        path = tmp_path / "t.cqtf"
        write_features(path, spec, labels, vocab.content_hash())
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(FeatureFileError):
            read_features(path)

    def test_version_mismatch(self, tmp_path, vocab):
        spec, labels = self._fixture(vocab)
        path = tmp_path / "t.cqtf"
        write_features(path, spec, labels, vocab.content_hash())
        blob = bytearray(path.read_bytes())
        blob[4:6] = (99).to_bytes(2, "little")
        path.write_bytes(bytes(blob))
        with pytest.raises(FeatureFileError, match="version"):
            read_features(path)

    def test_vocab_hash_mismatch(self, tmp_path, vocab):
        spec, labels = self._fixture(vocab)
        path = tmp_path / "t.cqtf"
        write_features(path, spec, labels, bytes(32))
        with pytest.raises(FeatureFileError, match="hash"):
            read_features(path, vocab)
