from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chordkit.decode import (
    ChordPath,
    DecodeLattice,
    build_lattice,
    frames_to_intervals,
    greedy_decode,
    path_score,
    viterbi_decode,
)
from chordkit.features import align_labels_to_frames
from chordkit.net.functional import log_softmax_rows, softmax_rows
from chordkit.net.model import ComponentActivations


def acts_from_scores(scores):
    return ComponentActivations(
        tuple(softmax_rows(s) for s in scores),
        tuple(scores),
        tuple(log_softmax_rows(s) for s in scores))


def brute_force_best(lattice, penalty):
    best = -np.inf
    T, V = lattice.obs_logp.shape
    for ids in product(range(V), repeat=T):
        score = path_score(lattice, np.array(ids), penalty)
        if score > best:
            best = score
    return best


class TestLattice:
    def test_uniform_activations(self, vocab):
        T = 3
        sizes = (73, 13, 4, 4, 3, 3)
        acts = acts_from_scores([np.zeros((T, m)) for m in sizes])
        lattice = build_lattice(acts, vocab)
        expected = sum(np.log(1.0 / m) for m in sizes)
        assert np.allclose(lattice.obs_logp, expected)

    def test_onehot_is_maximal_with_zero_logp(self, vocab):
        T, idx = 2, 40
        tgt = vocab.chords[idx].as_tuple()
        scores = []
        for j, m in enumerate((73, 13, 4, 4, 3, 3)):
            s = np.full((T, m), -1e3)
            s[:, tgt[j]] = 1e3
            scores.append(s)
        lattice = build_lattice(acts_from_scores(scores), vocab)
        assert lattice.obs_logp[0].argmax() == idx
        assert lattice.obs_logp[0, idx] == pytest.approx(0.0, abs=1e-9)

    def test_rows_match_hand_sum(self, vocab):
        rng = np.random.default_rng(4)
        T = 3
        scores = [rng.normal(0, 1, (T, m)) for m in (73, 13, 4, 4, 3, 3)]
        acts = acts_from_scores(scores)
        lattice = build_lattice(acts, vocab)
        for v in (0, 57, 300):
            tup = vocab.chords[v].as_tuple()
            for t in range(T):
                by_hand = sum(float(acts.log_betas[j][t, tup[j]]) for j in range(6))
                assert lattice.obs_logp[t, v] == pytest.approx(by_hand, rel=1e-12)


class TestGreedy:
    def test_single_frame(self):
        lattice = DecodeLattice(np.array([[0.1, 0.9, 0.3]]))
        assert greedy_decode(lattice).ids.tolist() == [1]

    def test_tie_breaks_to_lowest_index(self):
        lattice = DecodeLattice(np.zeros((4, 5)))
        assert greedy_decode(lattice).ids.tolist() == [0, 0, 0, 0]

    def test_equals_viterbi_at_zero_penalty(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            lattice = DecodeLattice(rng.normal(0, 1, (8, 6)))
            assert np.array_equal(greedy_decode(lattice).ids,
                                  viterbi_decode(lattice, 0.0).ids)


class TestViterbi:
    def test_exhaustive_oracle(self):
        rng = np.random.default_rng(6)
        for trial in range(200):
            T = int(rng.integers(1, 7))
            V = int(rng.integers(2, 9))
            penalty = float(rng.choice([0.0, 0.25, 1.0, 2.5, 8.0]))
            lattice = DecodeLattice(rng.normal(0.0, 2.0, (T, V)))
            result = viterbi_decode(lattice, penalty)
            assert result.score == brute_force_best(lattice, penalty)
            assert path_score(lattice, result.ids, penalty) == result.score

    def test_huge_penalty_gives_constant_path(self):
        rng = np.random.default_rng(7)
        obs = rng.normal(0.0, 1.0, (12, 5))
        penalty = 12 * float(obs.max() - obs.min()) + 1.0
        result = viterbi_decode(DecodeLattice(obs), penalty)
        assert len(set(result.ids.tolist())) == 1
        # The constant label maximizes the summed column score.
        assert result.ids[0] == obs.sum(axis=0).argmax()

    def test_transitions_monotone_in_penalty(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            lattice = DecodeLattice(rng.normal(0, 2, (40, 7)))
            previous = None
            for penalty in (0.0, 0.5, 1.0, 2.0, 5.0, 100.0):
                ids = viterbi_decode(lattice, penalty).ids
                transitions = int((np.diff(ids) != 0).sum())
                if previous is not None:
                    assert transitions <= previous
                previous = transitions

    def test_shift_invariance(self):
        rng = np.random.default_rng(9)
        obs = rng.normal(0, 1, (10, 4))
        a = viterbi_decode(DecodeLattice(obs), 1.5).ids
        b = viterbi_decode(DecodeLattice(obs + 37.5), 1.5).ids
        assert np.array_equal(a, b)

    def test_negative_penalty_rejected(self):
        with pytest.raises(ValueError):
            viterbi_decode(DecodeLattice(np.zeros((2, 2))), -1.0)

    def test_empty_lattice_rejected(self):
        with pytest.raises(ValueError):
            DecodeLattice(np.zeros((0, 4)))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_oracle_property(self, seed):
        rng = np.random.default_rng(seed)
        T = int(rng.integers(1, 6))
        V = int(rng.integers(2, 7))
        penalty = float(rng.uniform(0.0, 4.0))
        lattice = DecodeLattice(rng.normal(0.0, 2.0, (T, V)))
        result = viterbi_decode(lattice, penalty)
        assert result.score == brute_force_best(lattice, penalty)


class TestIntervals:
    def test_constant_path_duration(self, vocab):
        frame_rate = 22050 / 512
        path = ChordPath(np.full(43, 7), 0.0)
        intervals = frames_to_intervals(path, frame_rate, vocab)
        assert len(intervals) == 1
        assert intervals[0].start == 0.0
        assert intervals[0].end == pytest.approx(43 / frame_rate, rel=1e-9)
        assert intervals[0].end == pytest.approx(0.998, abs=2e-3)

    def test_alternating_ids(self, vocab):
        ids = np.array([1, 2] * 5)
        intervals = frames_to_intervals(ChordPath(ids, 0.0), 10.0, vocab)
        assert len(intervals) == 10
        assert all(a.label != b.label for a, b in zip(intervals, intervals[1:]))

    def test_round_trip_through_alignment(self, vocab):
        rng = np.random.default_rng(10)
        ids = np.repeat(rng.integers(0, 301, 6), rng.integers(2, 9, 6))
        frame_rate = 43.06640625
        intervals = frames_to_intervals(ChordPath(ids, 0.0), frame_rate, vocab)
        labels = align_labels_to_frames(intervals, len(ids), frame_rate, vocab)
        assert np.array_equal(labels.ids.astype(ids.dtype), ids)

    def test_empty_path_rejected(self, vocab):
        with pytest.raises(ValueError):
            frames_to_intervals(ChordPath(np.array([], dtype=int), 0.0), 10.0, vocab)
