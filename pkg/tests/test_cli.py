"""End-to-end CLI pipeline tests on tiny synthetic data."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from chordkit.chords import read_annotations
from chordkit.cli import main
from chordkit.features import read_features
from chordkit.reporting import read_metrics_csv


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory, vocab):
    """synth -> features -> train -> decode, shared across the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()

    r = runner.invoke(main, ["synth", str(root / "data"), "--num-tracks", "6",
                             "--palette", "C:maj,G:maj,A:min",
                             "--track-seconds", "1.2", "2.0", "--seed", "3"])
    assert r.exit_code == 0, r.output

    r = runner.invoke(main, ["features", str(root / "data"), str(root / "data"),
                             str(root / "feats")])
    assert r.exit_code == 0, r.output

    r = runner.invoke(main, ["train", str(root / "feats"), str(root / "run"),
                             "--fold", "1", "--max-epochs", "2",
                             "--segment-length", "32", "--batch-size", "4",
                             "--input-dim", "16", "--num-heads", "2",
                             "--ffn-dim", "32", "--num-layers", "1",
                             "--max-offset", "32", "--seed", "1"])
    assert r.exit_code == 0, r.output

    r = runner.invoke(main, ["decode", str(root / "run" / "best.ckpt"),
                             str(root / "feats"), str(root / "est"),
                             "--transition-penalty", "1.0"])
    assert r.exit_code == 0, r.output
    return root, runner


class TestSynth:
    def test_writes_paired_files_and_manifest(self, pipeline):
        root, _ = pipeline
        wavs = sorted((root / "data").glob("*.wav"))
        labs = sorted((root / "data").glob("*.lab"))
        assert len(wavs) == len(labs) == 6
        manifest = json.loads((root / "data" / "manifest.json").read_text())
        assert manifest["command"] == "synth"
        assert manifest["seed"] == 3


class TestFeatures:
    def test_one_file_per_track_without_augment(self, pipeline):
        root, _ = pipeline
        assert len(list((root / "feats").glob("*.cqtf"))) == 6

    def test_augment_writes_twelve_shifts_per_track(self, pipeline, vocab):
        root, runner = pipeline
        out = root / "feats_aug"
        # restrict to two tracks for speed
        small = root / "data_small"
        small.mkdir(exist_ok=True)
        for stem in ("synth000", "synth001"):
            (small / f"{stem}.wav").write_bytes((root / "data" / f"{stem}.wav").read_bytes())
            (small / f"{stem}.lab").write_bytes((root / "data" / f"{stem}.lab").read_bytes())
        r = runner.invoke(main, ["features", str(small), str(small), str(out), "--augment"])
        assert r.exit_code == 0, r.output
        files = list(out.glob("*.cqtf"))
        assert len(files) == 24
        spec, _, _ = read_features(out / "synth000.shift+3.cqtf", vocab)
        assert spec.shift == 3

    def test_unpaired_files_warned_and_skipped(self, pipeline, tmp_path):
        root, runner = pipeline
        lonely = tmp_path / "lonely"
        lonely.mkdir()
        (lonely / "only.wav").write_bytes((root / "data" / "synth000.wav").read_bytes())
        r = runner.invoke(main, ["features", str(lonely), str(lonely), str(tmp_path / "out")])
        assert r.exit_code != 0
        assert "no paired" in r.output

    def test_missing_annotation_warns_but_continues(self, pipeline, tmp_path):
        root, runner = pipeline
        mixed = tmp_path / "mixed"
        mixed.mkdir()
        for stem in ("synth000", "synth001"):
            (mixed / f"{stem}.wav").write_bytes((root / "data" / f"{stem}.wav").read_bytes())
        (mixed / "synth000.lab").write_bytes((root / "data" / "synth000.lab").read_bytes())
        r = runner.invoke(main, ["features", str(mixed), str(mixed), str(tmp_path / "out2")])
        assert r.exit_code == 0
        assert "synth001" in r.output


class TestTrain:
    def test_outputs_exist(self, pipeline):
        root, _ = pipeline
        for name in ("best.ckpt", "training_log.csv", "manifest.json",
                     "class_weights.csv", "split.json"):
            assert (root / "run" / name).exists(), name

    def test_invalid_fold_rejected(self, pipeline):
        root, runner = pipeline
        r = runner.invoke(main, ["train", str(root / "feats"), str(root / "runx"),
                                 "--fold", "6"])
        assert r.exit_code != 0
        assert "1..5" in r.output

    def test_unknown_config_key_rejected(self, pipeline, tmp_path):
        root, runner = pipeline
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("not_a_key = 3\n")
        r = runner.invoke(main, ["train", str(root / "feats"), str(tmp_path / "runy"),
                                 "--config", str(cfg)])
        assert r.exit_code != 0
        assert "not_a_key" in r.output

    def test_config_file_mirrored_by_flags(self, pipeline, tmp_path):
        root, runner = pipeline
        cfg = tmp_path / "ok.cfg"
        cfg.write_text("max_epochs = 1\nsegment_length = 32\nbatch_size = 4\n"
                       "input_dim = 16\nnum_heads = 2\nffn_dim = 32\n"
                       "num_layers = 1\nmax_offset = 32\n")
        out = tmp_path / "runz"
        r = runner.invoke(main, ["train", str(root / "feats"), str(out),
                                 "--config", str(cfg), "--seed", "4"])
        assert r.exit_code == 0, r.output
        log = (out / "training_log.csv").read_text().splitlines()
        assert len(log) == 2     # header + one epoch

    def test_flags_override_config_file(self, pipeline, tmp_path):
        root, runner = pipeline
        cfg = tmp_path / "base.cfg"
        cfg.write_text("max_epochs = 1\nsegment_length = 32\nbatch_size = 4\n"
                       "input_dim = 16\nnum_heads = 2\nffn_dim = 32\n"
                       "num_layers = 1\nmax_offset = 32\n")
        out = tmp_path / "override"
        r = runner.invoke(main, ["train", str(root / "feats"), str(out),
                                 "--config", str(cfg), "--max-epochs", "2"])
        assert r.exit_code == 0, r.output
        log = (out / "training_log.csv").read_text().splitlines()
        assert len(log) == 3     # header + two epochs: the flag won

    def test_rerun_same_seed_identical_log(self, pipeline, tmp_path):
        root, runner = pipeline
        logs = []
        for name in ("a", "b"):
            out = tmp_path / name
            r = runner.invoke(main, ["train", str(root / "feats"), str(out),
                                     "--fold", "1", "--max-epochs", "2",
                                     "--segment-length", "32", "--batch-size", "4",
                                     "--input-dim", "16", "--num-heads", "2",
                                     "--ffn-dim", "32", "--num-layers", "1",
                                     "--max-offset", "32", "--seed", "9"])
            assert r.exit_code == 0, r.output
            logs.append((out / "training_log.csv").read_bytes())
        assert logs[0] == logs[1]


class TestDecode:
    def test_interval_files_parse_back(self, pipeline):
        root, _ = pipeline
        est_files = sorted((root / "est").glob("*.lab"))
        assert len(est_files) == 6
        intervals = read_annotations(est_files[0])
        assert intervals[0].start == 0.0

    def test_zero_penalty_equals_greedy(self, pipeline, tmp_path):
        root, runner = pipeline
        ckpt = str(root / "run" / "best.ckpt")
        a, b = tmp_path / "p0", tmp_path / "greedy"
        r = runner.invoke(main, ["decode", ckpt, str(root / "feats"), str(a),
                                 "--transition-penalty", "0"])
        assert r.exit_code == 0, r.output
        r = runner.invoke(main, ["decode", ckpt, str(root / "feats"), str(b),
                                 "--greedy"])
        assert r.exit_code == 0, r.output
        for fa in sorted(a.glob("*.lab")):
            assert fa.read_bytes() == (b / fa.name).read_bytes()

    def test_huge_penalty_single_interval(self, pipeline, tmp_path):
        root, runner = pipeline
        out = tmp_path / "smooth"
        r = runner.invoke(main, ["decode", str(root / "run" / "best.ckpt"),
                                 str(root / "feats"), str(out),
                                 "--transition-penalty", "1e9"])
        assert r.exit_code == 0, r.output
        for path in out.glob("*.lab"):
            assert len(read_annotations(path)) == 1


class TestEval:
    def test_self_eval_is_perfect(self, pipeline, tmp_path):
        root, runner = pipeline
        out = tmp_path / "self"
        r = runner.invoke(main, ["eval", str(root / "data"), str(root / "data"), str(out)])
        assert r.exit_code == 0, r.output
        scores = read_metrics_csv(out / "metrics.csv")
        for metric in ("wcsr_root", "wcsr_mirex", "wcsr_tetrads"):
            assert scores[metric] == 100.0
        assert scores["acc_frame"] == 1.0
        for name in ("metrics.json", "confusion.csv", "confusion.svg",
                     "recall_per_quality.csv", "recall_per_quality.svg",
                     "manifest.json"):
            assert (out / name).exists(), name

    def test_model_eval_runs(self, pipeline, tmp_path):
        root, runner = pipeline
        out = tmp_path / "modeleval"
        r = runner.invoke(main, ["eval", str(root / "data"), str(root / "est"), str(out)])
        assert r.exit_code == 0, r.output
        scores = read_metrics_csv(out / "metrics.csv")
        assert 0.0 <= scores["wcsr_root"] <= 100.0
        assert 0.0 <= scores["acc_class"] <= 1.0

    def test_no_common_stems_fails(self, pipeline, tmp_path):
        root, runner = pipeline
        empty = tmp_path / "none"
        empty.mkdir()
        r = runner.invoke(main, ["eval", str(root / "data"), str(empty), str(tmp_path / "o")])
        assert r.exit_code != 0

    def test_column_order(self, pipeline, tmp_path):
        root, runner = pipeline
        out = tmp_path / "cols"
        r = runner.invoke(main, ["eval", str(root / "data"), str(root / "data"), str(out)])
        assert r.exit_code == 0
        lines = (out / "metrics.csv").read_text().splitlines()
        names = [line.split(",")[0] for line in lines[1:]]
        assert names == ["wcsr_root", "wcsr_thirds", "wcsr_majmin", "wcsr_triads",
                         "wcsr_sevenths", "wcsr_tetrads", "wcsr_mirex",
                         "acc_frame", "acc_class"]


class TestReport:
    def test_combines_eval_and_training_log(self, pipeline, tmp_path):
        root, runner = pipeline
        eval_out = tmp_path / "eval"
        r = runner.invoke(main, ["eval", str(root / "data"), str(root / "est"),
                                 str(eval_out)])
        assert r.exit_code == 0, r.output
        out = tmp_path / "report"
        r = runner.invoke(main, ["report", str(out),
                                 "--eval-dir", str(eval_out),
                                 "--label", "tiny-run",
                                 "--train-log", str(root / "run" / "training_log.csv")])
        assert r.exit_code == 0, r.output
        assert (out / "summary.csv").exists()
        assert (out / "wcsr_comparison.svg").exists()
        curves = list(out.glob("training_curve_*.svg"))
        assert len(curves) == 1
        summary = (out / "summary.csv").read_text()
        assert "tiny-run" in summary

    def test_report_without_inputs_fails(self, pipeline, tmp_path):
        _, runner = pipeline
        r = runner.invoke(main, ["report", str(tmp_path / "r")])
        assert r.exit_code != 0


class TestManifests:
    def test_every_output_dir_has_one_manifest(self, pipeline):
        root, _ = pipeline
        for d in ("data", "feats", "run", "est"):
            assert (root / d / "manifest.json").exists()

    def test_manifest_records_inputs(self, pipeline):
        root, _ = pipeline
        manifest = json.loads((root / "est" / "manifest.json").read_text())
        assert manifest["command"] == "decode"
        assert manifest["tool_version"]
        assert manifest["input_hashes"]


def test_idempotent_decode_outputs(pipeline, tmp_path):
    root, runner = pipeline
    outs = []
    for name in ("i1", "i2"):
        out = tmp_path / name
        r = runner.invoke(main, ["decode", str(root / "run" / "best.ckpt"),
                                 str(root / "feats"), str(out),
                                 "--transition-penalty", "1.0"])
        assert r.exit_code == 0
        outs.append(b"".join(p.read_bytes() for p in sorted(out.glob("*.lab"))))
    assert outs[0] == outs[1]
