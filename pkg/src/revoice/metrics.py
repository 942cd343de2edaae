"""Objective evaluation: SI-SDR, log-spectral distance, and a dataset driver.

STOI / PESQ are consumed through an external-evaluator seam (a callable or a
shell command taking two WAV paths and printing one scalar) rather than being
reimplemented here.
"""

from __future__ import annotations

import csv
import math
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dsp import StftConfig, Waveform, stft, write_wav


def si_sdr(est: Waveform, ref: Waveform) -> float:
    """Scale-invariant signal-to-distortion ratio in dB; inf when est is a
    rescaled copy of ref."""
    if len(est) != len(ref):
        raise ValueError(f"length mismatch: est {len(est)} vs ref {len(ref)}")
    e, r = est.samples, ref.samples
    r_energy = float(np.dot(r, r))
    if r_energy == 0.0:
        raise ValueError("silent reference")
    alpha = float(np.dot(e, r)) / r_energy
    target = alpha * r
    residual = target - e
    res_energy = float(np.dot(residual, residual))
    if res_energy == 0.0:
        return math.inf
    return 10.0 * math.log10(float(np.dot(target, target)) / res_energy)


LSD_FLOOR = 1e-8


def lsd(est: Waveform, ref: Waveform, cfg: StftConfig = StftConfig()) -> float:
    """Log-spectral distance: per-frame RMS over bins of log10-magnitude
    differences, averaged over frames."""
    if len(est) != len(ref):
        raise ValueError(f"length mismatch: est {len(est)} vs ref {len(ref)}")
    m_est = np.log10(np.maximum(np.abs(stft(est, cfg).bins), LSD_FLOOR))
    m_ref = np.log10(np.maximum(np.abs(stft(ref, cfg).bins), LSD_FLOOR))
    return float(np.mean(np.sqrt(np.mean((m_est - m_ref) ** 2, axis=0))))


class ExternalEvaluator:
    """Adapter for reference-based external metrics (STOI, PESQ, ...).

    Wraps either a Python callable (est_path, ref_path) -> float or a shell
    command invoked as `<cmd> <est.wav> <ref.wav>` printing one number.
    """

    def __init__(self, spec):
        self._callable = spec if callable(spec) else None
        self._command = None if callable(spec) else shlex.split(spec)

    def __call__(self, est: Waveform, ref: Waveform) -> float:
        with tempfile.TemporaryDirectory() as tmp:
            est_path = Path(tmp) / "est.wav"
            ref_path = Path(tmp) / "ref.wav"
            write_wav(est_path, est)
            write_wav(ref_path, ref)
            if self._callable is not None:
                return float(self._callable(str(est_path), str(ref_path)))
            out = subprocess.run(
                self._command + [str(est_path), str(ref_path)],
                capture_output=True, text=True, check=True,
            )
            return float(out.stdout.strip().split()[-1])


@dataclass
class EvalReport:
    """Per-utterance metric rows plus recomputable aggregates."""

    columns: list
    rows: list = field(default_factory=list)  # dicts keyed by column name

    def aggregate(self, column: str):
        values = [row[column] for row in self.rows if row[column] is not None]
        finite = [v for v in values if math.isfinite(v)]
        if not values:
            return float("nan"), float("nan")
        if not finite:
            return math.inf, 0.0
        return float(np.mean(finite)), float(np.std(finite))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id"] + self.columns)
            for row in self.rows:
                writer.writerow(
                    [row["id"]] + [_format_value(row[c]) for c in self.columns]
                )

    def summary_line(self) -> str:
        parts = []
        for col in self.columns:
            mean, std = self.aggregate(col)
            parts.append(f"{col}={mean:.4f}±{std:.4f}")
        return " ".join(parts)


def _format_value(v):
    if v is None:
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.6f}"


def evaluate(
    model,
    pairs,
    stft_cfg: StftConfig = StftConfig(),
    metric_names=("si_sdr", "lsd"),
    external: dict | None = None,
) -> EvalReport:
    """Run `model` (Waveform -> Waveform) over (id, input, target) triples and
    collect the selected metrics. Missing external adapters simply omit their
    columns; they never fail the run.
    """
    external = external or {}
    builtin = [m for m in metric_names if m in ("si_sdr", "lsd")]
    # each built-in metric is reported for the model output and, as a baseline,
    # for the unprocessed input
    columns = [c for m in builtin for c in (m, f"{m}_input")] + list(external)
    report = EvalReport(columns=columns)
    fns = {"si_sdr": si_sdr, "lsd": lambda e, r: lsd(e, r, stft_cfg)}
    for utt_id, x, y in pairs:
        est = model(x)
        n = min(len(est), len(y), len(x))
        est = Waveform(est.samples[:n], est.sample_rate)
        inp = Waveform(x.samples[:n], x.sample_rate)
        ref = Waveform(y.samples[:n], y.sample_rate)
        row = {"id": utt_id}
        for m in builtin:
            row[m] = fns[m](est, ref)
            row[f"{m}_input"] = fns[m](inp, ref)
        for name, adapter in external.items():
            try:
                row[name] = adapter(est, ref)
            except Exception:
                row[name] = None
        report.rows.append(row)
    return report
