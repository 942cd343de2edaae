"""Figure rendering for training logs and evaluation reports.

Figures are written next to the delimited outputs (CSV) so a run directory is
self-describing.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_loss_curves(rows, path):
    """Plot generator/discriminator loss trajectories from train log rows."""
    steps = [r["step"] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    for key, label in (("loss_mel", "mel"), ("loss_g_adv", "adversarial"),
                       ("loss_fm", "feature matching")):
        vals = [r.get(key) for r in rows]
        if any(v is not None for v in vals):
            axes[0].plot(steps, vals, label=label)
    axes[0].set_xlabel("step")
    axes[0].set_ylabel("generator loss")
    axes[0].set_yscale("log")
    axes[0].legend()
    d_keys = sorted(k for k in rows[0] if k.startswith("loss_d."))
    for key in d_keys:
        axes[1].plot(steps, [r.get(key) for r in rows], label=key.replace("loss_", "D"))
    axes[1].set_xlabel("step")
    axes[1].set_ylabel("discriminator loss")
    if d_keys:
        axes[1].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_metric_histograms(report, path):
    """Histogram the per-utterance metric columns of an EvalReport."""
    cols = [c for c in report.columns
            if any(r[c] is not None and math.isfinite(r[c]) for r in report.rows)]
    if not cols:
        return
    fig, axes = plt.subplots(1, len(cols), figsize=(4.5 * len(cols), 3.6), squeeze=False)
    for ax, col in zip(axes[0], cols):
        values = [r[col] for r in report.rows if r[col] is not None and math.isfinite(r[col])]
        ax.hist(values, bins=min(20, max(len(values) // 2, 3)), edgecolor="black")
        mean, std = report.aggregate(col)
        ax.set_title(f"{col}: {mean:.3f}±{std:.3f}")
        ax.set_xlabel(col)
        ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_spectrogram_pair(est, ref, path, stft_fn, title=""):
    """Side-by-side log-magnitude spectrograms of an estimate and a reference."""
    fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
    for ax, (name, w) in zip(axes, (("estimate", est), ("reference", ref))):
        spec = stft_fn(w)
        mag = 20 * np.log10(np.maximum(np.abs(spec.bins), 1e-8))
        ax.imshow(mag, origin="lower", aspect="auto", cmap="magma",
                  extent=[0, w.duration, 0, w.sample_rate / 2 / 1000])
        ax.set_title(f"{title} {name}".strip())
        ax.set_xlabel("time (s)")
    axes[0].set_ylabel("frequency (kHz)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
