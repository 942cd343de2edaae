"""Corpus ingestion and segment sampling.

Bandwidth-extension corpora hold targets only (`<root>/<speaker>/<utt>.wav`);
inputs are synthesized on the fly. Enhancement corpora hold matched pairs
(`<root>/noisy/<id>.wav`, `<root>/clean/<id>.wav`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .degrade import DegradationSpec, degrade_bwe
from .dsp import Waveform, read_wav


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    """Held-out speakers and per-speaker held-out utterances (BWE only)."""

    exclude_speakers: tuple = ()
    holdout_per_speaker: int = 0
    split: str = "train"  # train | test

    def __post_init__(self):
        if self.split not in ("train", "test"):
            raise ManifestError(f"unknown split {self.split!r}")


@dataclass(frozen=True)
class Manifest:
    entries: tuple  # (input_path | None, target_path) pairs
    task: str
    sample_rate: int

    def __len__(self):
        return len(self.entries)


def _check_decodable(paths):
    bad = []
    for p in paths:
        try:
            with open(p, "rb") as fh:
                if fh.read(4) != b"RIFF":
                    bad.append(f"{p}: not a RIFF file")
        except OSError as exc:
            bad.append(f"{p}: {exc}")
    return bad


def build_manifest(root_dir, task: str, split_spec: SplitSpec | None = None,
                   sample_rate: int = 16000) -> Manifest:
    """Scan a corpus tree into a deterministic, lexicographically ordered manifest."""
    root = Path(root_dir)
    split_spec = split_spec or SplitSpec()
    if task == "bwe":
        entries = []
        speakers = sorted(p for p in root.iterdir() if p.is_dir()) if root.is_dir() else []
        # train: non-excluded speakers minus their first holdout_per_speaker files
        # (held out to avoid text-level leakage); test: the excluded speakers
        for speaker in speakers:
            files = sorted(speaker.glob("*.wav"))
            if speaker.name in split_spec.exclude_speakers:
                if split_spec.split == "test":
                    entries.extend((None, str(p)) for p in files)
            elif split_spec.split == "train":
                entries.extend((None, str(p)) for p in files[split_spec.holdout_per_speaker :])
        bad = _check_decodable([t for _, t in entries])
        if bad:
            raise ManifestError("undecodable corpus files:\n" + "\n".join(bad))
    elif task == "se":
        noisy_dir, clean_dir = root / "noisy", root / "clean"
        noisy = {p.name: p for p in noisy_dir.glob("*.wav")} if noisy_dir.is_dir() else {}
        clean = {p.name: p for p in clean_dir.glob("*.wav")} if clean_dir.is_dir() else {}
        orphans = sorted(set(noisy) ^ set(clean))
        if orphans:
            raise ManifestError(
                "mismatched noisy/clean basenames: " + ", ".join(orphans)
            )
        entries = [(str(noisy[k]), str(clean[k])) for k in sorted(noisy)]
        bad = _check_decodable([p for pair in entries for p in pair])
        if bad:
            raise ManifestError("undecodable corpus files:\n" + "\n".join(bad))
    else:
        raise ManifestError(f"unknown task {task!r}")
    if not entries:
        warnings.warn(f"empty manifest for {root} (task={task})", stacklevel=2)
    return Manifest(entries=tuple(entries), task=task, sample_rate=sample_rate)


def _crop_or_pad(samples: np.ndarray, length: int, start: int) -> np.ndarray:
    if len(samples) >= length:
        return samples[start : start + length]
    out = samples
    while len(out) < length:
        if len(out) <= 1:
            return np.pad(out, (0, length - len(out)), mode="edge")
        pad = min(length - len(out), len(out) - 1)
        out = np.pad(out, (0, pad), mode="reflect")
    return out


def sample_segment(
    entry,
    segment_length: int,
    rng: np.random.Generator,
    task: str = "bwe",
    degradation: DegradationSpec | None = None,
):
    """Draw an aligned (input, target) segment pair from a manifest entry.

    Clips shorter than segment_length are reflect-padded. For BWE the input
    side is synthesized by degrading the cropped target.
    """
    input_path, target_path = entry
    y = read_wav(target_path)
    if len(y) > segment_length:
        start = int(rng.integers(0, len(y) - segment_length + 1))
    else:
        start = 0
    y_seg = Waveform(_crop_or_pad(y.samples, segment_length, start), y.sample_rate)
    if task == "bwe":
        if degradation is None:
            raise ValueError("bwe sampling requires a DegradationSpec")
        x_seg = degrade_bwe(y_seg, degradation, rng)
    else:
        x = read_wav(input_path)
        x_seg = Waveform(_crop_or_pad(x.samples, segment_length, start), x.sample_rate)
    return x_seg, y_seg


def load_pair(entry, task: str, degradation: DegradationSpec | None = None,
              rng: np.random.Generator | None = None):
    """Load a full-utterance (input, target) pair (validation/evaluation path)."""
    input_path, target_path = entry
    y = read_wav(target_path)
    if task == "bwe":
        if degradation is None:
            raise ValueError("bwe pairs require a DegradationSpec")
        rng = rng if rng is not None else np.random.default_rng(degradation.seed)
        x = degrade_bwe(y, degradation, rng)
    else:
        x = read_wav(input_path)
    return x, y
