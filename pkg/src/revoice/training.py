"""Alternating GAN optimization: per-step discriminator then generator updates,
checkpointing with full RNG state, periodic validation, and CSV/figure logs.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import TrainConfig, config_to_flat_dict
from .data import Manifest, load_pair, sample_segment
from .degrade import DegradationSpec
from .dsp import MelFilterbank, Waveform
from .losses import feature_matching_loss, generator_total_loss, lsgan_d_loss, lsgan_g_loss, mel_loss
from .metrics import si_sdr
from .models.discriminators import build_discriminators
from .models.generator import Generator
from .models.spectral_ops import TorchMel

DETERMINISTIC_ENV = "REVOICE_DETERMINISTIC"


class TrainingDiverged(RuntimeError):
    """Raised when a loss goes NaN; carries the last loss record."""

    def __init__(self, record):
        super().__init__(f"non-finite loss encountered: {record}")
        self.record = record


def deterministic_mode() -> bool:
    return os.environ.get(DETERMINISTIC_ENV, "") not in ("", "0")


def seed_everything(seed: int):
    torch.manual_seed(seed)
    if deterministic_mode():
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)
    return np.random.default_rng(seed)


@dataclass
class TrainState:
    config: TrainConfig
    generator: Generator
    discriminators: torch.nn.Module
    opt_g: torch.optim.Optimizer
    opt_d: list
    sched_g: torch.optim.lr_scheduler.ExponentialLR
    sched_d: list
    mel: TorchMel
    rng: np.random.Generator
    step: int = 0


def degradation_spec(cfg: TrainConfig) -> DegradationSpec:
    return DegradationSpec(
        task="bwe",
        source_rate=cfg.degrade.source_rate,
        target_rate=cfg.sample_rate,
        filter_families=tuple(cfg.degrade.filter_families),
        order_range=(cfg.degrade.order_min, cfg.degrade.order_max),
        seed=cfg.seed,
    )


def create_state(cfg: TrainConfig) -> TrainState:
    rng = seed_everything(cfg.seed)
    generator = Generator(cfg.generator)
    discriminators = build_discriminators(cfg.discriminator)
    opt_g = torch.optim.Adam(generator.parameters(), lr=cfg.lr_g, betas=cfg.adam_betas)
    opt_d = [
        torch.optim.Adam(member.parameters(), lr=cfg.lr_d, betas=cfg.adam_betas)
        for member in discriminators.members
    ]
    sched_g = torch.optim.lr_scheduler.ExponentialLR(opt_g, gamma=cfg.lr_decay)
    sched_d = [torch.optim.lr_scheduler.ExponentialLR(o, gamma=cfg.lr_decay) for o in opt_d]
    fb = MelFilterbank(cfg.sample_rate, cfg.generator.stft.n_fft, cfg.generator.n_mels)
    mel = TorchMel(fb, cfg.generator.stft)
    return TrainState(
        config=cfg, generator=generator, discriminators=discriminators,
        opt_g=opt_g, opt_d=opt_d, sched_g=sched_g, sched_d=sched_d, mel=mel, rng=rng,
    )


def train_step(state: TrainState, batch) -> dict:
    """One alternating update: every discriminator first, then the generator."""
    x, y = batch
    record = {"step": state.step + 1}

    with torch.no_grad():
        y_hat_detached = state.generator(x)
    for i, (member, opt) in enumerate(zip(state.discriminators.members, state.opt_d)):
        real = member(y)
        fake = member(y_hat_detached)
        loss_d = lsgan_d_loss(real.score, fake.score)
        opt.zero_grad()
        loss_d.backward()
        opt.step()
        record[f"loss_d.{i}"] = float(loss_d.detach())

    y_hat = state.generator(x)
    fake_outs = [member(y_hat) for member in state.discriminators.members]
    with torch.no_grad():
        real_outs = [member(y) for member in state.discriminators.members]
    adv = lsgan_g_loss([o.score for o in fake_outs])
    fm = feature_matching_loss(
        [o.features for o in real_outs], [o.features for o in fake_outs]
    )
    mel_v = mel_loss(y, y_hat, state.mel)
    total = generator_total_loss(adv, fm, mel_v, state.config.weights)
    state.opt_g.zero_grad()
    total.backward()
    state.opt_g.step()

    record.update(
        loss_g_adv=float(adv.detach()), loss_fm=float(fm.detach()),
        loss_mel=float(mel_v.detach()), loss_g_total=float(total.detach()),
    )
    if not all(math.isfinite(v) for k, v in record.items() if k != "step"):
        raise TrainingDiverged(record)
    state.step += 1
    return record


def make_batch(state: TrainState, manifest: Manifest):
    cfg = state.config
    spec = degradation_spec(cfg) if cfg.task == "bwe" else None
    xs, ys = [], []
    for _ in range(cfg.batch_size):
        idx = int(state.rng.integers(0, len(manifest)))
        x_seg, y_seg = sample_segment(
            manifest.entries[idx], cfg.segment_length, state.rng,
            task=cfg.task, degradation=spec,
        )
        xs.append(torch.from_numpy(x_seg.samples).float())
        ys.append(torch.from_numpy(y_seg.samples).float())
    return torch.stack(xs), torch.stack(ys)


def save_checkpoint(state: TrainState, path):
    payload = {
        "config": config_to_flat_dict(state.config),
        "step": state.step,
        "g": state.generator.state_dict(),
        "opt_g": state.opt_g.state_dict(),
        "sched_g": state.sched_g.state_dict(),
        "rng": {"torch": torch.get_rng_state(), "numpy": state.rng.bit_generator.state},
    }
    for i, member in enumerate(state.discriminators.members):
        payload[f"d.{i}"] = member.state_dict()
        payload[f"opt_d.{i}"] = state.opt_d[i].state_dict()
        payload[f"sched_d.{i}"] = state.sched_d[i].state_dict()
    tmp = str(path) + ".tmp"
    torch.save(payload, tmp)
    os.replace(tmp, path)


def load_checkpoint(path, cfg: TrainConfig) -> TrainState:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    state = create_state(cfg)
    state.step = payload["step"]
    state.generator.load_state_dict(payload["g"])
    state.opt_g.load_state_dict(payload["opt_g"])
    state.sched_g.load_state_dict(payload["sched_g"])
    for i, member in enumerate(state.discriminators.members):
        member.load_state_dict(payload[f"d.{i}"])
        state.opt_d[i].load_state_dict(payload[f"opt_d.{i}"])
        state.sched_d[i].load_state_dict(payload[f"sched_d.{i}"])
    torch.set_rng_state(payload["rng"]["torch"])
    state.rng.bit_generator.state = payload["rng"]["numpy"]
    return state


def load_generator(path) -> tuple:
    """Load just the generator (inference path). Returns (generator, config)."""
    from .config import config_from_flat_dict

    payload = torch.load(path, map_location="cpu", weights_only=False)
    cfg = config_from_flat_dict(payload["config"])
    generator = Generator(cfg.generator)
    generator.load_state_dict(payload["g"])
    generator.eval()
    return generator, cfg


def validate(state: TrainState, manifest: Manifest, max_clips: int) -> dict:
    """Mel loss and SI-SDR on full (uncropped) held-out utterances."""
    cfg = state.config
    spec = degradation_spec(cfg) if cfg.task == "bwe" else None
    mel_vals, sdr_vals = [], []
    state.generator.eval()
    with torch.no_grad():
        for entry in manifest.entries[:max_clips]:
            x, y = load_pair(entry, cfg.task, spec)
            n = min(len(x), len(y))
            n -= n % cfg.generator.length_multiple
            if n == 0:
                continue
            xt = torch.from_numpy(x.samples[:n]).float().unsqueeze(0)
            yt = torch.from_numpy(y.samples[:n]).float().unsqueeze(0)
            y_hat = state.generator(xt)
            mel_vals.append(float(mel_loss(yt, y_hat, state.mel)))
            est = Waveform(y_hat[0].numpy().astype(np.float64), cfg.sample_rate)
            ref = Waveform(y.samples[:n], cfg.sample_rate)
            sdr = si_sdr(est, ref)
            if math.isfinite(sdr):
                sdr_vals.append(sdr)
    state.generator.train()
    return {
        "val_mel": float(np.mean(mel_vals)) if mel_vals else float("nan"),
        "val_si_sdr": float(np.mean(sdr_vals)) if sdr_vals else float("nan"),
    }


def train(
    cfg: TrainConfig,
    manifest: Manifest,
    out_dir,
    val_manifest: Manifest | None = None,
    resume=None,
    progress=None,
):
    """Run cfg.total_steps of alternating updates. Returns (state, log rows).

    Writes scalar logs (CSV), a config echo, loss-curve figures, and periodic
    checkpoints under out_dir; the run is resumable from any checkpoint.
    """
    from .report import render_loss_curves

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if resume is not None:
        state = load_checkpoint(resume, cfg)
    else:
        state = create_state(cfg)
    with open(out_dir / "config.txt", "w") as fh:
        for key, value in config_to_flat_dict(cfg).items():
            fh.write(f"{key}={value}\n")

    steps_per_epoch = max(len(manifest) // cfg.batch_size, 1)
    rows = []
    while state.step < cfg.total_steps:
        batch = make_batch(state, manifest)
        record = train_step(state, batch)
        if state.step % steps_per_epoch == 0:
            state.sched_g.step()
            for sched in state.sched_d:
                sched.step()
        if state.step % cfg.validate_every == 0:
            record.update(validate(state, val_manifest or manifest, cfg.max_validation_clips))
        if state.step % cfg.log_every == 0 or state.step == cfg.total_steps:
            rows.append(record)
            if progress is not None:
                progress(record)
        if state.step % cfg.checkpoint_every == 0 or state.step == cfg.total_steps:
            save_checkpoint(state, out_dir / f"checkpoint_{state.step:08d}.pt")
            save_checkpoint(state, out_dir / "checkpoint_last.pt")
    if not (out_dir / "checkpoint_last.pt").exists():
        save_checkpoint(state, out_dir / "checkpoint_last.pt")

    log_path = out_dir / "train_log.csv"
    if rows:
        keys = sorted({k for row in rows for k in row}, key=lambda k: (k != "step", k))
        with open(log_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys)
            writer.writeheader()
            writer.writerows(rows)
        render_loss_curves(rows, out_dir / "loss_curves.png")
    return state, rows
