"""Core DSP primitives: waveform container, STFT/iSTFT, mel filterbank, resampling, WAV I/O.

All functions are pure and operate on immutable inputs; no shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps
from scipy.io import wavfile

MEL_FLOOR = 1e-5


class WavFormatError(ValueError):
    """Raised for malformed or unsupported WAV files."""


@dataclass(frozen=True)
class Waveform:
    """Mono audio signal with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"expected mono 1-D samples, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains NaN or Inf samples")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def periodic_hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


_WINDOWS = {"hann": periodic_hann}


@dataclass(frozen=True)
class StftConfig:
    """Framing parameters. The window/hop pair must satisfy COLA so the
    inverse transform reconstructs interior samples exactly."""

    n_fft: int = 1024
    hop: int = 256
    win_length: int = 1024
    window: str = "hann"

    def __post_init__(self):
        if not (0 < self.hop <= self.win_length <= self.n_fft):
            raise ValueError(
                f"need 0 < hop <= win_length <= n_fft, got "
                f"hop={self.hop} win_length={self.win_length} n_fft={self.n_fft}"
            )
        if self.window not in _WINDOWS:
            raise ValueError(f"unknown window {self.window!r}")
        win = _WINDOWS[self.window](self.win_length)
        if not sps.check_COLA(win, self.win_length, self.win_length - self.hop):
            raise ValueError(
                f"window={self.window!r} win_length={self.win_length} hop={self.hop} "
                "does not satisfy the COLA condition"
            )

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def pad(self) -> int:
        # reflect padding per side so that frames == len(w) / hop for
        # hop-multiple input lengths
        return (self.n_fft - self.hop) // 2

    def window_array(self) -> np.ndarray:
        win = _WINDOWS[self.window](self.win_length)
        if self.win_length < self.n_fft:
            lpad = (self.n_fft - self.win_length) // 2
            win = np.pad(win, (lpad, self.n_fft - self.win_length - lpad))
        return win


@dataclass(frozen=True)
class ComplexSpectrogram:
    """Complex STFT bins of shape (n_fft/2+1, frames)."""

    bins: np.ndarray
    config: StftConfig

    def __post_init__(self):
        if self.bins.ndim != 2 or self.bins.shape[0] != self.config.n_bins:
            raise ValueError(
                f"expected {self.config.n_bins} frequency bins, got shape {self.bins.shape}"
            )

    @property
    def frames(self) -> int:
        return self.bins.shape[1]


def stft(w: Waveform, cfg: StftConfig = StftConfig()) -> ComplexSpectrogram:
    """STFT with reflect padding of (n_fft - hop)/2 per side.

    For hop-multiple input lengths the frame count is exactly len(w)/hop.
    """
    x = w.samples
    if len(x) < cfg.n_fft:
        raise ValueError(f"input length {len(x)} shorter than one window ({cfg.n_fft})")
    x = np.pad(x, (cfg.pad, cfg.pad), mode="reflect")
    n_frames = (len(x) - cfg.n_fft) // cfg.hop + 1
    win = cfg.window_array()
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.n_fft)[:: cfg.hop][:n_frames]
    spec = np.fft.rfft(frames * win, n=cfg.n_fft, axis=1).T
    return ComplexSpectrogram(bins=spec, config=cfg)


def istft(s: ComplexSpectrogram, sample_rate: int = 16000) -> Waveform:
    """Weighted overlap-add inversion; exact on a COLA-valid config."""
    cfg = s.config
    win = cfg.window_array()
    frames = np.fft.irfft(s.bins.T, n=cfg.n_fft, axis=1) * win
    total = (s.frames - 1) * cfg.hop + cfg.n_fft
    out = np.zeros(total)
    wsum = np.zeros(total)
    for m in range(s.frames):
        start = m * cfg.hop
        out[start : start + cfg.n_fft] += frames[m]
        wsum[start : start + cfg.n_fft] += win**2
    out = out / np.maximum(wsum, 1e-12)
    out = out[cfg.pad : total - cfg.pad]
    return Waveform(samples=out, sample_rate=sample_rate)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular mel filterbank matrix of shape (n_mels, n_fft/2+1)."""

    sample_rate: int
    n_fft: int
    n_mels: int = 80
    f_min: float = 0.0
    f_max: float | None = None
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        f_max = self.f_max if self.f_max is not None else self.sample_rate / 2
        if not (0 <= self.f_min < f_max <= self.sample_rate / 2):
            raise ValueError(
                f"need 0 <= f_min < f_max <= nyquist, got f_min={self.f_min} "
                f"f_max={f_max} rate={self.sample_rate}"
            )
        object.__setattr__(self, "f_max", f_max)
        mel_pts = np.linspace(hz_to_mel(self.f_min), hz_to_mel(f_max), self.n_mels + 2)
        hz_pts = mel_to_hz(mel_pts)
        bin_freqs = np.arange(self.n_fft // 2 + 1) * self.sample_rate / self.n_fft
        weights = np.zeros((self.n_mels, len(bin_freqs)))
        for i in range(self.n_mels):
            lo, ctr, hi = hz_pts[i], hz_pts[i + 1], hz_pts[i + 2]
            up = (bin_freqs - lo) / max(ctr - lo, 1e-12)
            down = (hi - bin_freqs) / max(hi - ctr, 1e-12)
            weights[i] = np.clip(np.minimum(up, down), 0.0, None)
        if np.any(weights.sum(axis=1) <= 0):
            raise ValueError("mel filterbank has empty filters; increase n_fft or reduce n_mels")
        object.__setattr__(self, "weights", weights)


@dataclass(frozen=True)
class MelSpectrogram:
    """Log-amplitude mel spectrogram of shape (n_mels, frames)."""

    values: np.ndarray

    @property
    def frames(self) -> int:
        return self.values.shape[1]


def mel_spectrogram(
    w: Waveform, fb: MelFilterbank, cfg: StftConfig = StftConfig()
) -> MelSpectrogram:
    """log(max(fb . |STFT(w)|, floor)) with natural log and floor 1e-5."""
    if fb.n_fft != cfg.n_fft:
        raise ValueError(f"filterbank n_fft={fb.n_fft} does not match config n_fft={cfg.n_fft}")
    if fb.sample_rate != w.sample_rate:
        raise ValueError(
            f"filterbank rate={fb.sample_rate} does not match waveform rate={w.sample_rate}"
        )
    mag = np.abs(stft(w, cfg).bins)
    values = np.log(np.maximum(fb.weights @ mag, MEL_FLOOR))
    return MelSpectrogram(values=values)


def _kaiser_lowpass(up: int, down: int) -> np.ndarray:
    # 64 taps per polyphase branch; beta sized for >= 60 dB stopband
    taps = 64 * max(up, down) + 1
    cutoff = 1.0 / max(up, down)  # relative to Nyquist at the upsampled rate
    return sps.firwin(taps, cutoff, window=("kaiser", 8.555))


def resample(w: Waveform, target_rate: int) -> Waveform:
    """Polyphase rational-rate conversion with a Kaiser-windowed sinc kernel."""
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == w.sample_rate:
        return w
    g = math.gcd(target_rate, w.sample_rate)
    up, down = target_rate // g, w.sample_rate // g
    out = sps.resample_poly(w.samples, up, down, window=_kaiser_lowpass(up, down) * up)
    n_out = round(len(w) * target_rate / w.sample_rate)
    if len(out) < n_out:
        out = np.pad(out, (0, n_out - len(out)))
    return Waveform(samples=out[:n_out], sample_rate=target_rate)


def read_wav(path) -> Waveform:
    """Read a PCM16 or float32 WAV; multichannel input is downmixed by averaging."""
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise WavFormatError(f"{path}: malformed WAV header ({exc})") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise WavFormatError(
            f"{path}: unsupported sample encoding {data.dtype}; expected int16 or float32"
        )
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return Waveform(samples=samples, sample_rate=int(rate))


def write_wav(path, w: Waveform, encoding: str = "float32") -> None:
    """Write mono WAV as IEEE float32 (default) or PCM16."""
    if encoding == "float32":
        wavfile.write(path, w.sample_rate, w.samples.astype(np.float32))
    elif encoding == "pcm16":
        clipped = np.clip(w.samples, -1.0, 32767.0 / 32768.0)
        wavfile.write(path, w.sample_rate, np.round(clipped * 32768.0).astype(np.int16))
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
