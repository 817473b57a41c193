"""Batch command-line interface.

Subcommands cover the whole pipeline: ``synth`` writes toy audio+annotation
pairs, ``features`` extracts (optionally augmented) spectrogram files,
``train`` fits a model on one cross-validation fold, ``decode`` emits
interval files from a checkpoint, ``eval`` scores estimates against
references, and ``report`` renders comparison tables and figures.

Every command writes a manifest.json into its output directory recording the
command, option snapshot, input hashes, seed and tool version; outputs are
deterministic given equal manifests (timestamps aside). Relative input paths
that do not exist are retried under $CHORDKIT_DATA.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import __version__
from .chords import (
    ChordVocabulary,
    component_class_names,
    default_vocabulary,
    load_vocabulary,
    read_annotations,
    write_annotations,
)
from .decode import build_lattice, frames_to_intervals, greedy_decode, viterbi_decode
from .features import (
    SHIFT_RANGE,
    align_labels_to_frames,
    compute_cqt,
    load_wav,
    pitch_shift_cqt,
    read_features,
    save_wav,
    to_db,
    transpose_labels,
    write_features,
)
from .metrics import (
    acc_class_from_evals,
    acc_frame_from_evals,
    confusion_matrix,
    evaluate_track,
    per_quality_recall,
    wcsr_from_evals,
    DEFAULT_FRAME_RATE,
)
from .net import ModelConfig, load_checkpoint, model_forward
from .objective import compute_class_weights, count_components, export_weight_table
from .reporting import (
    METRIC_ROW_ORDER,
    plot_confusion_heatmap,
    plot_metric_comparison,
    plot_recall_bars,
    plot_training_curves,
    read_metrics_csv,
    write_confusion_csv,
    write_metrics_csv,
    write_metrics_json,
    write_recall_csv,
)
from .synth import SynthConfig, synth_dataset
from .training import (
    TrainConfig,
    feature_file_name,
    kfold_split,
    load_feature_dir,
    train_loop,
)


def resolve_data_path(path: str) -> Path:
    """Use $CHORDKIT_DATA as a fallback root for relative inputs."""
    p = Path(path)
    if p.exists() or p.is_absolute():
        return p
    root = os.environ.get("CHORDKIT_DATA")
    if root and (Path(root) / p).exists():
        return Path(root) / p
    return p


def _hash_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _hash_inputs(paths: list[Path]) -> dict[str, str]:
    hashes = {}
    for p in paths:
        if p.is_dir():
            inner = hashlib.sha256()
            for f in sorted(p.rglob("*")):
                if f.is_file():
                    inner.update(f.name.encode())
                    inner.update(bytes.fromhex(_hash_file(f)))
            hashes[str(p)] = inner.hexdigest()
        elif p.is_file():
            hashes[str(p)] = _hash_file(p)
    return hashes


def write_manifest(out_dir: Path, command: str, options: dict,
                   inputs: list[Path], seed: int | None) -> None:
    manifest = {
        "command": command,
        "options": {k: (str(v) if isinstance(v, Path) else v) for k, v in options.items()},
        "input_hashes": _hash_inputs(inputs),
        "seed": seed,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_vocab(vocab_path: str | None) -> ChordVocabulary:
    if vocab_path is None:
        return default_vocabulary()
    return load_vocabulary(resolve_data_path(vocab_path))


@click.group()
@click.version_option(__version__)
def main():
    """Chord recognition toolkit: features, training, decoding, evaluation."""


@main.command()
@click.argument("out_dir", type=click.Path(path_type=Path))
@click.option("--num-tracks", default=8, show_default=True)
@click.option("--palette", default="C:maj,G:maj,A:min,F:maj", show_default=True,
              help="Comma-separated chord symbols.")
@click.option("--weights", default=None,
              help="Comma-separated sampling weights matching the palette.")
@click.option("--track-seconds", nargs=2, type=float, default=(3.0, 6.0), show_default=True)
@click.option("--snr", type=float, default=None, help="SNR in dB; omit for noise-free.")
@click.option("--seed", default=0, show_default=True)
def synth(out_dir: Path, num_tracks: int, palette: str, weights: str | None,
          track_seconds: tuple[float, float], snr: float | None, seed: int):
    """Write synthetic WAV + annotation pairs for pipeline testing."""
    symbols = tuple(s.strip() for s in palette.split(",") if s.strip())
    weight_values = None
    if weights:
        weight_values = tuple(float(w) for w in weights.split(","))
    config = SynthConfig(palette=symbols, palette_weights=weight_values,
                         num_tracks=num_tracks, track_seconds=track_seconds,
                         snr_db=snr)
    vocab = default_vocabulary()
    out_dir.mkdir(parents=True, exist_ok=True)
    for track in synth_dataset(config, seed, vocab):
        save_wav(out_dir / f"{track.track_id}.wav", track.clip)
        write_annotations(out_dir / f"{track.track_id}.lab", track.intervals)
    write_manifest(out_dir, "synth",
                   {"num_tracks": num_tracks, "palette": palette, "weights": weights,
                    "track_seconds": list(track_seconds), "snr": snr},
                   [], seed)
    click.echo(f"wrote {num_tracks} synthetic tracks to {out_dir}")


@main.command()
@click.argument("audio_dir", type=str)
@click.argument("annotation_dir", type=str)
@click.argument("out_dir", type=click.Path(path_type=Path))
@click.option("--augment", is_flag=True,
              help="Also write pitch-shifted variants (-5..+6 semitones).")
@click.option("--vocab", "vocab_path", default=None, help="Vocabulary file override.")
@click.option("--jobs", default=1, show_default=True)
def features(audio_dir: str, annotation_dir: str, out_dir: Path, augment: bool,
             vocab_path: str | None, jobs: int):
    """Extract dB-scaled spectrogram feature files from WAV/annotation pairs."""
    audio_root = resolve_data_path(audio_dir)
    ann_root = resolve_data_path(annotation_dir)
    vocab = _load_vocab(vocab_path)
    wavs = {p.stem: p for p in sorted(audio_root.glob("*.wav"))}
    labs = {p.stem: p for p in sorted(ann_root.glob("*.lab"))}
    stems = sorted(set(wavs) & set(labs))
    for stem in sorted(set(wavs) - set(labs)):
        click.echo(f"warning: no annotation for {stem}, skipped", err=True)
    for stem in sorted(set(labs) - set(wavs)):
        click.echo(f"warning: no audio for {stem}, skipped", err=True)
    if not stems:
        raise click.ClickException("no paired audio/annotation files found")

    out_dir.mkdir(parents=True, exist_ok=True)
    shifts = list(range(SHIFT_RANGE[0], SHIFT_RANGE[1] + 1)) if augment else [0]
    vocab_hash = vocab.content_hash()

    def one(stem: str) -> int:
        clip = load_wav(wavs[stem])
        spec = to_db(compute_cqt(clip))
        labels = align_labels_to_frames(read_annotations(labs[stem]),
                                        spec.num_frames, spec.frame_rate, vocab)
        written = 0
        for shift in shifts:
            shifted_spec = pitch_shift_cqt(spec, shift)
            shifted_labels = transpose_labels(labels, shift, vocab) if shift else labels
            write_features(out_dir / feature_file_name(stem, shift),
                           shifted_spec, shifted_labels, vocab_hash)
            written += 1
        return written

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            counts = list(pool.map(one, stems))
    else:
        counts = [one(stem) for stem in stems]
    write_manifest(out_dir, "features",
                   {"audio_dir": str(audio_root), "annotation_dir": str(ann_root),
                    "augment": augment, "jobs": jobs},
                   [audio_root, ann_root], None)
    click.echo(f"wrote {sum(counts)} feature files for {len(stems)} tracks to {out_dir}")


def _parse_config_file(path: Path) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.ClickException(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


_TRAIN_KEYS = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
_MODEL_KEYS = {f.name: f.type for f in dataclasses.fields(ModelConfig)
               if f.name not in ("component_sizes",)}


def _coerce(name: str, value: str):
    text = str(value)
    if "." in text or "e" in text.lower():
        return float(text)
    return int(text)


def _build_configs(config_file: Path | None, overrides: dict) -> tuple[TrainConfig, ModelConfig]:
    train_kwargs: dict = {}
    model_kwargs: dict = {}
    if config_file is not None:
        raw = _parse_config_file(config_file)
        unknown = [k for k in raw if k not in _TRAIN_KEYS and k not in _MODEL_KEYS]
        if unknown:
            raise click.ClickException(
                f"unknown config keys: {', '.join(sorted(unknown))}")
        for key, value in raw.items():
            target = train_kwargs if key in _TRAIN_KEYS else model_kwargs
            target[key] = _coerce(key, value)
    for key, value in overrides.items():
        if value is None:
            continue
        target = train_kwargs if key in _TRAIN_KEYS else model_kwargs
        target[key] = value
    return TrainConfig(**train_kwargs), ModelConfig(**model_kwargs)


@main.command()
@click.argument("features_dir", type=str)
@click.argument("out_dir", type=click.Path(path_type=Path))
@click.option("--config", "config_file", type=click.Path(exists=True, path_type=Path),
              default=None, help="key = value config file; CLI flags win.")
@click.option("--fold", default=1, show_default=True, help="Cross-validation fold (1..5).")
@click.option("--seed", type=int, default=None)
@click.option("--vocab", "vocab_path", default=None)
@click.option("--segment-length", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--init-lr", type=float, default=None)
@click.option("--max-epochs", type=int, default=None)
@click.option("--patience", type=int, default=None)
@click.option("--reweight-gamma", type=float, default=None)
@click.option("--reweight-wmax", type=float, default=None)
@click.option("--transition-penalty", type=float, default=None)
@click.option("--input-dim", type=int, default=None)
@click.option("--num-heads", type=int, default=None)
@click.option("--ffn-dim", type=int, default=None)
@click.option("--num-layers", type=int, default=None)
@click.option("--dropout-rate", type=float, default=None)
@click.option("--max-offset", type=int, default=None)
@click.option("--log-every", type=int, default=0, help="Print progress every N epochs.")
def train(features_dir: str, out_dir: Path, config_file: Path | None, fold: int,
          vocab_path: str | None, log_every: int, **overrides):
    """Train on one fold of a 5-fold split over the feature directory."""
    feat_root = resolve_data_path(features_dir)
    vocab = _load_vocab(vocab_path)
    train_cfg, model_cfg = _build_configs(config_file, overrides)
    grouped = load_feature_dir(feat_root, vocab)
    if not grouped:
        raise click.ClickException(f"no feature files under {feat_root}")
    plan = kfold_split(sorted(grouped), seed=train_cfg.seed)
    if not 1 <= fold <= plan.fold_count:
        raise click.ClickException(f"--fold {fold} invalid: folds are 1..{plan.fold_count}")
    split = plan.folds[fold - 1]

    out_dir.mkdir(parents=True, exist_ok=True)
    counts = count_components(np.vstack(
        [v.targets for tid in split["train"] for v in grouped[tid]]))
    weights = compute_class_weights(counts, train_cfg.reweight_gamma, train_cfg.reweight_wmax)
    export_weight_table(out_dir / "class_weights.csv", counts, weights,
                        class_names=component_class_names())

    result = train_loop(train_cfg, model_cfg, grouped, split["train"], split["val"],
                        out_dir=out_dir, log_every=log_every)
    (out_dir / "split.json").write_text(json.dumps(split, indent=2, sort_keys=True) + "\n")
    write_manifest(out_dir, "train",
                   {"features_dir": str(feat_root), "fold": fold,
                    "train_config": dataclasses.asdict(train_cfg),
                    "model_config": model_cfg.to_dict()},
                   [feat_root] + ([config_file] if config_file else []),
                   train_cfg.seed)
    click.echo(f"trained {len(result.log_rows)} epochs; best val loss "
               f"{result.best_val_loss:.4f}; checkpoint at {out_dir / 'best.ckpt'}")


@main.command()
@click.argument("checkpoint", type=str)
@click.argument("features_dir", type=str)
@click.argument("out_dir", type=click.Path(path_type=Path))
@click.option("--transition-penalty", default=2.0, show_default=True)
@click.option("--greedy", is_flag=True, help="Per-frame argmax instead of Viterbi.")
@click.option("--vocab", "vocab_path", default=None)
@click.option("--jobs", default=1, show_default=True)
def decode(checkpoint: str, features_dir: str, out_dir: Path,
           transition_penalty: float, greedy: bool, vocab_path: str | None, jobs: int):
    """Decode interval files from shift-0 feature files with a checkpoint."""
    ckpt_path = resolve_data_path(checkpoint)
    feat_root = resolve_data_path(features_dir)
    vocab = _load_vocab(vocab_path)
    params, _ = load_checkpoint(ckpt_path)
    paths = sorted(feat_root.glob("*.cqtf"))
    from .training import parse_feature_file_name

    targets = []
    for path in paths:
        parsed = parse_feature_file_name(path.name)
        if parsed is None:
            continue
        stem, shift = parsed
        if shift == 0:
            targets.append((stem, path))
    if not targets:
        raise click.ClickException(f"no shift-0 feature files under {feat_root}")
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(item):
        stem, path = item
        spec, _, _ = read_features(path, vocab)
        if spec.data.shape[1] != params.config.cqt_bins:
            raise click.ClickException(
                f"{path.name}: {spec.data.shape[1]} bins, checkpoint expects "
                f"{params.config.cqt_bins}")
        acts = model_forward(spec.data, params, training=False)
        lattice = build_lattice(acts, vocab)
        path_result = greedy_decode(lattice) if greedy or transition_penalty == 0.0 \
            else viterbi_decode(lattice, transition_penalty)
        write_annotations(out_dir / f"{stem}.lab",
                          frames_to_intervals(path_result, spec.frame_rate, vocab))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(one, targets))
    else:
        for item in targets:
            one(item)
    write_manifest(out_dir, "decode",
                   {"checkpoint": str(ckpt_path), "features_dir": str(feat_root),
                    "transition_penalty": transition_penalty, "greedy": greedy},
                   [ckpt_path, feat_root], None)
    click.echo(f"decoded {len(targets)} tracks to {out_dir}")


@main.command(name="eval")
@click.argument("ref_dir", type=str)
@click.argument("est_dir", type=str)
@click.argument("out_dir", type=click.Path(path_type=Path))
@click.option("--vocab", "vocab_path", default=None)
@click.option("--frame-rate", default=DEFAULT_FRAME_RATE, show_default=True)
@click.option("--jobs", default=1, show_default=True)
def eval_cmd(ref_dir: str, est_dir: str, out_dir: Path, vocab_path: str | None,
             frame_rate: float, jobs: int):
    """Score estimated intervals against references; write tables and figures."""
    ref_root = resolve_data_path(ref_dir)
    est_root = resolve_data_path(est_dir)
    vocab = _load_vocab(vocab_path)
    refs = {p.stem: p for p in sorted(ref_root.glob("*.lab"))}
    ests = {p.stem: p for p in sorted(est_root.glob("*.lab"))}
    stems = sorted(set(refs) & set(ests))
    if not stems:
        raise click.ClickException("no common track stems between ref and est")
    for stem in sorted(set(refs) ^ set(ests)):
        click.echo(f"warning: unmatched track {stem}", err=True)

    from .metrics import frame_count_for_duration

    def one(stem: str):
        ref_iv = read_annotations(refs[stem])
        est_iv = read_annotations(ests[stem])
        ev = evaluate_track(stem, ref_iv, est_iv, vocab, frame_rate)
        duration = max((iv.end for iv in ref_iv), default=0.0)
        frames = frame_count_for_duration(duration, frame_rate)
        ref_labels = align_labels_to_frames(ref_iv, frames, frame_rate, vocab)
        est_labels = align_labels_to_frames(est_iv, frames, frame_rate, vocab)
        return ev, ref_labels.ids.astype(np.int64), est_labels.ids.astype(np.int64)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, stems))
    else:
        results = [one(stem) for stem in stems]

    evals = [r[0] for r in results]
    ref_ids = {stem: r[1] for stem, r in zip(stems, results)}
    est_ids = {stem: r[2] for stem, r in zip(stems, results)}

    scores = {f"wcsr_{m}": wcsr_from_evals(evals, m)
              for m in ("root", "thirds", "majmin", "triads", "sevenths", "tetrads", "mirex")}
    scores["acc_frame"] = acc_frame_from_evals(evals)
    scores["acc_class"] = acc_class_from_evals(evals)

    out_dir.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(out_dir / "metrics.csv", scores)
    write_metrics_json(out_dir / "metrics.json", scores,
                       extra={"num_tracks": len(stems)})
    counts, qualities = confusion_matrix(ref_ids, est_ids, vocab, frame_rate=frame_rate)
    write_confusion_csv(out_dir / "confusion.csv", counts, qualities)
    plot_confusion_heatmap(out_dir / "confusion.svg", counts, qualities)
    recall_rows = per_quality_recall(counts, qualities)
    write_recall_csv(out_dir / "recall_per_quality.csv", recall_rows)
    plot_recall_bars(out_dir / "recall_per_quality.svg", recall_rows)
    write_manifest(out_dir, "eval",
                   {"ref_dir": str(ref_root), "est_dir": str(est_root),
                    "frame_rate": frame_rate},
                   [ref_root, est_root], None)
    click.echo("  ".join(f"{k}={scores[k]:.4g}" for k in METRIC_ROW_ORDER))


@main.command()
@click.argument("out_dir", type=click.Path(path_type=Path))
@click.option("--eval-dir", "eval_dirs", multiple=True, required=False,
              help="Evaluation output directory; repeat to compare runs.")
@click.option("--label", "labels", multiple=True,
              help="Display label per --eval-dir (defaults to directory name).")
@click.option("--train-log", "train_logs", multiple=True,
              type=click.Path(exists=True, path_type=Path),
              help="training_log.csv to plot learning curves from.")
def report(out_dir: Path, eval_dirs: tuple[str, ...], labels: tuple[str, ...],
           train_logs: tuple[Path, ...]):
    """Combine eval runs and training logs into summary tables and figures."""
    if not eval_dirs and not train_logs:
        raise click.ClickException("nothing to report: pass --eval-dir and/or --train-log")
    if labels and len(labels) != len(eval_dirs):
        raise click.ClickException("--label count must match --eval-dir count")
    out_dir.mkdir(parents=True, exist_ok=True)

    runs: dict[str, dict[str, float]] = {}
    for i, d in enumerate(eval_dirs):
        root = resolve_data_path(d)
        name = labels[i] if labels else root.name
        runs[name] = read_metrics_csv(root / "metrics.csv")
    if runs:
        import csv as _csv

        with open(out_dir / "summary.csv", "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["run", *METRIC_ROW_ORDER])
            for name, scores in runs.items():
                writer.writerow([name, *[repr(scores[m]) for m in METRIC_ROW_ORDER]])
        plot_metric_comparison(out_dir / "wcsr_comparison.svg", runs)

    for log_path in train_logs:
        import csv as _csv

        with open(log_path, newline="") as fh:
            rows = [{"epoch": int(r["epoch"]), "train_loss": float(r["train_loss"]),
                     "val_loss": float(r["val_loss"]), "lr": float(r["lr"])}
                    for r in _csv.DictReader(fh)]
        stem = log_path.parent.name or log_path.stem
        plot_training_curves(out_dir / f"training_curve_{stem}.svg", rows)

    write_manifest(out_dir, "report",
                   {"eval_dirs": list(eval_dirs), "train_logs": [str(p) for p in train_logs]},
                   [resolve_data_path(d) for d in eval_dirs], None)
    click.echo(f"report written to {out_dir}")


if __name__ == "__main__":
    main()
