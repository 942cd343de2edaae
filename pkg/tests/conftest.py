import numpy as np
import pytest
import torch

from revoice.config import TrainConfig
from revoice.dsp import StftConfig, Waveform, stft, write_wav
from revoice.models.generator import GeneratorConfig, UpsamplerConfig


@pytest.fixture(autouse=True)
def _torch_seed():
    torch.manual_seed(0)


def tone(freq_hz, length, rate=16000, amplitude=1.0, phase=0.0):
    t = np.arange(length) / rate
    return Waveform(amplitude * np.sin(2 * np.pi * freq_hz * t + phase), rate)


def harmonic_clip(f0, length, rate=16000, n_harmonics=24, seed=0):
    """Speech-like fixture: a decaying harmonic stack with a slow envelope,
    carrying energy well above 1 kHz so band truncation is clearly audible."""
    rng = np.random.default_rng(seed)
    t = np.arange(length) / rate
    x = np.zeros(length)
    for k in range(1, n_harmonics + 1):
        f = k * f0
        if f >= rate / 2 * 0.95:
            break
        x += np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi)) / np.sqrt(k)
    x *= 0.55 + 0.45 * np.sin(2 * np.pi * rng.uniform(1.5, 4.0) * t + rng.uniform(0, 2 * np.pi))
    x += 0.003 * rng.standard_normal(length)
    x *= 0.3 / np.max(np.abs(x))
    return Waveform(x, rate)


def band_energy(w, f_lo, f_hi=None, cfg=StftConfig()):
    """Total STFT magnitude-squared energy in [f_lo, f_hi) Hz."""
    spec = stft(w, cfg)
    freqs = np.arange(cfg.n_bins) * w.sample_rate / cfg.n_fft
    f_hi = f_hi if f_hi is not None else w.sample_rate / 2 + 1
    band = (freqs >= f_lo) & (freqs < f_hi)
    return float(np.sum(np.abs(spec.bins[band]) ** 2))


def micro_generator_config(**kwargs):
    """Smallest config that exercises every submodule; unit-test scale."""
    return GeneratorConfig(
        spectral_unet_widths=(2, 3, 4, 5),
        upsampler=UpsamplerConfig(
            initial_channels=16,
            out_channels=2,
            resblock_kernels=(3,),
            resblock_dilations=((1, 2),),
        ),
        wave_unet_widths=(2, 3, 4, 5),
        wave_unet_out_channels=2,
        masknet_widths=(2, 3, 4, 5),
        **kwargs,
    )


def micro_train_config(**kwargs):
    defaults = dict(
        task="bwe",
        generator=micro_generator_config(),
        segment_length=2048,
        batch_size=2,
        total_steps=2,
        checkpoint_every=1,
        validate_every=1000,
        log_every=1,
        max_validation_clips=2,
    )
    defaults.update(kwargs)
    return TrainConfig(**defaults)


def make_bwe_corpus(root, n_speakers=2, files_per_speaker=3, length=16384, rate=16000):
    """VCTK-style tree of synthetic harmonic clips; returns the written paths."""
    paths = []
    i = 0
    for s in range(n_speakers):
        spk = root / f"spk{s}"
        spk.mkdir(parents=True)
        for u in range(files_per_speaker):
            w = harmonic_clip(100 + 17 * i, length, rate, seed=i)
            p = spk / f"utt{u}.wav"
            write_wav(p, w)
            paths.append(p)
            i += 1
    return paths


@pytest.fixture
def bwe_corpus(tmp_path):
    root = tmp_path / "corpus"
    make_bwe_corpus(root)
    return root
