"""Command-line entry point: corpus degradation, training, inference, evaluation.

No interactive UI; runs emit files and logs that are inspected afterwards.
"""

from __future__ import annotations

import argparse
import json
import sys
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    TrainConfig,
    config_from_flat_dict,
    config_to_flat_dict,
    load_config,
    preset,
)
from .data import ManifestError, build_manifest
from .degrade import FILTER_FAMILIES, DegradationSpec, degrade_bwe, draw_filter
from .dsp import Waveform, read_wav, resample, stft, write_wav
from .inference import restore_waveform
from .metrics import ExternalEvaluator, evaluate
from .training import degradation_spec, load_generator, seed_everything, train


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ManifestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="revoice", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="write a degraded mirror of a WAV corpus")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--s", type=int, default=2000, help="effective bandwidth rate (Hz)")
    p.add_argument("--S", type=int, default=16000, dest="target_rate",
                   help="target sample rate (Hz)")
    p.add_argument("--families", default=",".join(FILTER_FAMILIES))
    p.add_argument("--order-min", type=int, default=2)
    p.add_argument("--order-max", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("train", help="train a restoration model")
    p.add_argument("--task", choices=("bwe", "se"))
    p.add_argument("--preset")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   dest="overrides", help="config override, applied after the file")
    p.add_argument("--data-root", required=True)
    p.add_argument("--val-root")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--steps", type=int, help="shorthand for --set total_steps=N")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    for name, help_text in (("enhance", "denoise speech with a trained model"),
                            ("extend", "extend bandwidth with a trained model")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("checkpoint")
        p.add_argument("input", help="WAV file or directory")
        p.add_argument("output", help="output WAV file or directory")
        p.add_argument("--resample", action="store_true",
                       help="resample inputs whose rate differs from the model")
        p.set_defaults(func=cmd_restore)

    p = sub.add_parser("evaluate", help="objective evaluation of a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--data-root", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--metrics", default="si_sdr,lsd")
    p.add_argument("--external-pesq", help="command taking <est.wav> <ref.wav>")
    p.add_argument("--external-stoi", help="command taking <est.wav> <ref.wav>")
    p.add_argument("--max-clips", type=int)
    p.add_argument("--figures", action="store_true", default=True)
    p.add_argument("--no-figures", action="store_false", dest="figures")
    p.set_defaults(func=cmd_evaluate)
    return parser


def cmd_degrade(args) -> int:
    in_dir, out_dir = Path(args.in_dir), Path(args.out_dir)
    if not in_dir.is_dir():
        print(f"error: {in_dir} is not a directory", file=sys.stderr)
        return 1
    spec = DegradationSpec(
        task="bwe",
        source_rate=args.s,
        target_rate=args.target_rate,
        filter_families=tuple(args.families.split(",")),
        order_range=(args.order_min, args.order_max),
        seed=args.seed,
    )
    failures = []
    for wav_path in sorted(in_dir.rglob("*.wav")):
        rel = wav_path.relative_to(in_dir)
        out_path = out_dir / rel
        out_path.parent.mkdir(parents=True, exist_ok=True)
        file_seed = (args.seed << 32) ^ zlib.crc32(str(rel).encode())
        try:
            y = read_wav(wav_path)
            rng = np.random.default_rng(file_seed)
            design = draw_filter(spec, rng)
            x = degrade_bwe(y, spec, rng, design=design)
            write_wav(out_path, x)
            sidecar = {
                "source": str(wav_path),
                "filter_family": design.family,
                "filter_order": design.order,
                "cutoff_hz": design.cutoff,
                "seed": file_seed,
            }
            out_path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))
        except (ValueError, OSError) as exc:
            failures.append(f"{wav_path}: {exc}")
    for line in failures:
        print(line, file=sys.stderr)
    return 1 if failures else 0


def _build_train_config(args) -> TrainConfig:
    if args.preset:
        cfg = preset(args.preset)
    elif args.task:
        cfg = preset(args.task)
    else:
        cfg = TrainConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    flat = config_to_flat_dict(cfg)
    for override in args.overrides:
        key, _, value = override.partition("=")
        flat[key.strip()] = value.strip()
    if args.task:
        flat["task"] = args.task
    if args.steps is not None:
        flat["total_steps"] = str(args.steps)
    return config_from_flat_dict(flat)


def cmd_train(args) -> int:
    cfg = _build_train_config(args)
    manifest = build_manifest(args.data_root, cfg.task, sample_rate=cfg.sample_rate)
    if len(manifest) == 0:
        print(f"error: no training files under {args.data_root}", file=sys.stderr)
        return 1
    val_manifest = None
    if args.val_root:
        val_manifest = build_manifest(args.val_root, cfg.task, sample_rate=cfg.sample_rate)

    def progress(record):
        parts = " ".join(f"{k}={v:.4f}" for k, v in record.items() if k != "step")
        print(f"step {record['step']}: {parts}", file=sys.stderr)

    train(cfg, manifest, args.out_dir, val_manifest=val_manifest,
          resume=args.resume, progress=progress)
    return 0


def cmd_restore(args) -> int:
    generator, cfg = load_generator(args.checkpoint)
    seed_everything(cfg.seed)
    in_path, out_path = Path(args.input), Path(args.output)
    if in_path.is_dir():
        files = sorted(in_path.glob("*.wav"))
        out_path.mkdir(parents=True, exist_ok=True)
        targets = [out_path / f.name for f in files]
    else:
        files, targets = [in_path], [out_path]
        if out_path.parent != Path():
            out_path.parent.mkdir(parents=True, exist_ok=True)
    failures = []
    for src, dst in zip(files, targets):
        try:
            w = read_wav(src)
            if w.sample_rate != cfg.sample_rate:
                if not args.resample:
                    raise ValueError(
                        f"{src}: rate {w.sample_rate} != model rate {cfg.sample_rate}; "
                        "pass --resample to convert"
                    )
                w = resample(w, cfg.sample_rate)
            restored = restore_waveform(generator, w)
            write_wav(dst, restored)
        except (ValueError, OSError) as exc:
            failures.append(f"{src}: {exc}")
    for line in failures:
        print(line, file=sys.stderr)
    return 1 if failures else 0


def cmd_evaluate(args) -> int:
    generator, cfg = load_generator(args.checkpoint)
    seed_everything(cfg.seed)
    manifest = build_manifest(args.data_root, cfg.task, sample_rate=cfg.sample_rate)
    if args.max_clips:
        manifest = type(manifest)(
            entries=manifest.entries[: args.max_clips],
            task=manifest.task, sample_rate=manifest.sample_rate,
        )
    from .data import load_pair

    spec = degradation_spec(cfg) if cfg.task == "bwe" else None
    pairs = []
    for entry in manifest.entries:
        x, y = load_pair(entry, cfg.task, spec)
        name = Path(entry[1]).stem
        pairs.append((name, x, y))

    external = {}
    if args.external_pesq:
        external["pesq"] = ExternalEvaluator(args.external_pesq)
    if args.external_stoi:
        external["stoi"] = ExternalEvaluator(args.external_stoi)
    metric_names = tuple(m.strip() for m in args.metrics.split(",") if m.strip())

    def model(w: Waveform) -> Waveform:
        return restore_waveform(generator, w)

    report = evaluate(model, pairs, cfg.generator.stft, metric_names, external)
    out_csv = Path(args.out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    report.write_csv(out_csv)
    if args.figures and report.rows:
        from .report import render_metric_histograms, render_spectrogram_pair

        render_metric_histograms(report, out_csv.with_suffix(".png"))
        name, x0, y0 = pairs[0]
        render_spectrogram_pair(model(x0), y0,
                                out_csv.with_name(out_csv.stem + "_spectrogram.png"),
                                lambda w: stft(w, cfg.generator.stft), title=name)
    print(report.summary_line())
    return 0


if __name__ == "__main__":
    sys.exit(main())
