"""Differentiable torch counterparts of the numpy STFT/mel primitives.

Framing, padding and the mel filterbank match revoice.dsp exactly so that
values computed on either path agree to numerical precision.
"""

from __future__ import annotations

import numpy as np
import torch

from ..dsp import MEL_FLOOR, MelFilterbank, StftConfig


class TorchStft(torch.nn.Module):
    """Batched STFT/iSTFT over (B, C, T) tensors, reflect-padded so that
    frames == T / hop for hop-multiple lengths."""

    def __init__(self, cfg: StftConfig):
        super().__init__()
        self.cfg = cfg
        self.register_buffer("window", torch.from_numpy(cfg.window_array()), persistent=False)

    def transform(self, x: torch.Tensor) -> torch.Tensor:
        """(B, C, T) -> complex (B, C, n_bins, frames)."""
        b, c, t = x.shape
        flat = x.reshape(b * c, t)
        flat = torch.nn.functional.pad(
            flat.unsqueeze(1), (self.cfg.pad, self.cfg.pad), mode="reflect"
        ).squeeze(1)
        spec = torch.stft(
            flat,
            n_fft=self.cfg.n_fft,
            hop_length=self.cfg.hop,
            win_length=self.cfg.n_fft,
            window=self.window.to(flat.dtype),
            center=False,
            return_complex=True,
        )
        return spec.reshape(b, c, spec.shape[-2], spec.shape[-1])

    def inverse(self, spec: torch.Tensor, length: int) -> torch.Tensor:
        """Complex (B, C, n_bins, frames) -> (B, C, length) via weighted overlap-add."""
        b, c, n_bins, frames = spec.shape
        win = self.window.to(spec.real.dtype)
        segs = torch.fft.irfft(spec.reshape(b * c, n_bins, frames).permute(0, 2, 1),
                               n=self.cfg.n_fft) * win
        # overlap-add via fold: (B*C, n_fft, frames) -> (B*C, total)
        total = (frames - 1) * self.cfg.hop + self.cfg.n_fft
        out = torch.nn.functional.fold(
            segs.permute(0, 2, 1),
            output_size=(1, total),
            kernel_size=(1, self.cfg.n_fft),
            stride=(1, self.cfg.hop),
        ).reshape(b * c, total)
        wsum = torch.nn.functional.fold(
            (win**2).expand(frames, -1).T.unsqueeze(0),
            output_size=(1, total),
            kernel_size=(1, self.cfg.n_fft),
            stride=(1, self.cfg.hop),
        ).reshape(total)
        out = out / wsum.clamp_min(1e-12)
        out = out[:, self.cfg.pad : self.cfg.pad + length]
        return out.reshape(b, c, length)


class TorchMel(torch.nn.Module):
    """Log-amplitude mel spectrogram of a (B, T) waveform batch."""

    def __init__(self, fb: MelFilterbank, cfg: StftConfig):
        super().__init__()
        if fb.n_fft != cfg.n_fft:
            raise ValueError(f"filterbank n_fft={fb.n_fft} != config n_fft={cfg.n_fft}")
        self.stft = TorchStft(cfg)
        self.register_buffer("weights", torch.from_numpy(fb.weights), persistent=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, T) -> (B, n_mels, frames)."""
        spec = self.stft.transform(x.unsqueeze(1)).squeeze(1)
        mag = torch.abs(spec)
        mel = torch.matmul(self.weights.to(mag.dtype), mag)
        return torch.log(torch.clamp(mel, min=MEL_FLOOR))


def mel_filterbank_tensor(fb: MelFilterbank) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(fb.weights))
