"""Waveform-restoration generator.

Pipeline: mel spectrogram -> 2D spectral preprocessing UNet -> convolutional
upsampler with multi-receptive-field residual blocks -> 1D time-domain UNet
fused with the input waveform -> phase-preserving spectral masking. Identical
structure for bandwidth extension and enhancement; submodules can be disabled
for ablation variants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from torch import nn
from torch.nn.utils.parametrizations import weight_norm

from ..dsp import MelFilterbank, StftConfig
from .spectral_ops import TorchMel, TorchStft
from .unet import LRELU_SLOPE, UNet1d, UNet2d, init_conv, init_weights


@dataclass(frozen=True)
class UpsamplerConfig:
    initial_channels: int = 128
    upsample_rates: tuple = (8, 8, 2, 2)
    upsample_kernels: tuple = (16, 16, 4, 4)
    resblock_kernels: tuple = (3, 7, 11)
    resblock_dilations: tuple = ((1, 3, 5), (1, 3, 5), (1, 3, 5))
    out_channels: int = 8  # number of intermediate waveform streams

    def __post_init__(self):
        if len(self.upsample_rates) != len(self.upsample_kernels):
            raise ValueError("upsample_rates and upsample_kernels must have equal length")
        if len(self.resblock_kernels) != len(self.resblock_dilations):
            raise ValueError("resblock_kernels and resblock_dilations must have equal length")
        if self.out_channels < 1:
            raise ValueError("out_channels must be >= 1")

    def stage_channels(self, stage: int) -> int:
        return max(self.initial_channels // (2 ** (stage + 1)), 1)


@dataclass(frozen=True)
class GeneratorConfig:
    sample_rate: int = 16000
    n_mels: int = 80
    stft: StftConfig = field(default_factory=StftConfig)
    spectral_unet_widths: tuple = (8, 16, 32, 64)
    spectral_unet_depth: int = 4
    upsampler: UpsamplerConfig = field(default_factory=UpsamplerConfig)
    wave_unet_widths: tuple = (10, 20, 40, 80)
    wave_unet_depth: int = 4
    wave_unet_out_channels: int = 4  # m streams into the spectral masker
    masknet_widths: tuple = (8, 12, 24, 32)
    masknet_depth: int = 4
    masknet_stft: StftConfig = field(default_factory=StftConfig)
    use_spectral_unet: bool = True
    use_wave_unet: bool = True
    use_spectral_masknet: bool = True
    concat_input: bool = True  # fuse the raw input waveform after upsampling

    def __post_init__(self):
        if math.prod(self.upsampler.upsample_rates) != self.stft.hop:
            raise ValueError(
                f"product of upsample_rates {self.upsampler.upsample_rates} must equal "
                f"hop {self.stft.hop}"
            )
        if self.wave_unet_out_channels < 1:
            raise ValueError("wave_unet_out_channels must be >= 1")

    @property
    def hop(self) -> int:
        return self.stft.hop

    @property
    def length_multiple(self) -> int:
        m = self.hop
        if self.use_wave_unet:
            m = math.lcm(m, 4 ** len(self.wave_unet_widths))
        if self.use_spectral_masknet:
            m = math.lcm(m, self.masknet_stft.hop)
        return m


class SpectralUNet(nn.Module):
    """2D UNet over the mel spectrogram with a global residual connection:
    the network predicts a correction to its input."""

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.unet = UNet2d(1, 1, cfg.spectral_unet_widths, cfg.spectral_unet_depth)

    def forward(self, mel: torch.Tensor) -> torch.Tensor:
        """(B, n_mels, frames) -> (B, n_mels, frames)."""
        x = mel.unsqueeze(1)
        return (x + self.unet(x)).squeeze(1)


class ResBlock(nn.Module):
    """Dilated residual block; one branch of the multi-receptive-field sum."""

    def __init__(self, channels, kernel, dilations):
        super().__init__()
        self.convs1 = nn.ModuleList(
            [
                weight_norm(
                    init_conv(nn.Conv1d(channels, channels, kernel, dilation=d,
                                        padding=(kernel * d - d) // 2))
                )
                for d in dilations
            ]
        )
        self.convs2 = nn.ModuleList(
            [
                weight_norm(init_conv(nn.Conv1d(channels, channels, kernel, padding=kernel // 2)))
                for _ in dilations
            ]
        )

    def forward(self, x):
        for c1, c2 in zip(self.convs1, self.convs2):
            xt = c1(F.leaky_relu(x, LRELU_SLOPE))
            xt = c2(F.leaky_relu(xt, LRELU_SLOPE))
            x = x + xt
        return x


class MRF(nn.Module):
    """Parallel residual blocks with different kernels/dilations, averaged."""

    def __init__(self, channels, kernels, dilations):
        super().__init__()
        self.blocks = nn.ModuleList(
            [ResBlock(channels, k, d) for k, d in zip(kernels, dilations)]
        )

    def forward(self, x):
        out = None
        for block in self.blocks:
            out = block(x) if out is None else out + block(x)
        return out / len(self.blocks)


class Upsampler(nn.Module):
    """Transposed-conv temporal upsampler interleaved with MRF blocks;
    maps (B, n_mels, frames) to (B, out_channels, frames * hop)."""

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        up = cfg.upsampler
        self.pre = weight_norm(init_conv(nn.Conv1d(cfg.n_mels, up.initial_channels, 7, padding=3)))
        self.ups = nn.ModuleList()
        self.mrfs = nn.ModuleList()
        ch = up.initial_channels
        for stage, (rate, kernel) in enumerate(zip(up.upsample_rates, up.upsample_kernels)):
            ch_out = up.stage_channels(stage)
            self.ups.append(
                weight_norm(
                    init_conv(nn.ConvTranspose1d(ch, ch_out, kernel, stride=rate,
                                                 padding=(kernel - rate) // 2))
                )
            )
            self.mrfs.append(MRF(ch_out, up.resblock_kernels, up.resblock_dilations))
            ch = ch_out
        self.post = weight_norm(init_conv(nn.Conv1d(ch, up.out_channels, 7, padding=3)))

    def forward(self, feat: torch.Tensor) -> torch.Tensor:
        x = self.pre(feat)
        for up, mrf in zip(self.ups, self.mrfs):
            x = mrf(up(F.leaky_relu(x, LRELU_SLOPE)))
        return torch.tanh(self.post(F.leaky_relu(x, LRELU_SLOPE)))


class WaveUNet(nn.Module):
    """Time-domain UNet over the upsampled streams fused with the input."""

    def __init__(self, cfg: GeneratorConfig, in_channels: int):
        super().__init__()
        self.unet = UNet1d(
            in_channels,
            cfg.wave_unet_out_channels,
            cfg.wave_unet_widths,
            cfg.wave_unet_depth,
            kernel=5,
            stride=4,
        )

    def forward(self, streams: torch.Tensor) -> torch.Tensor:
        """(B, C, T) -> (B, m, T); T must be a multiple of 256."""
        return self.unet(streams)


class SpectralMaskNet(nn.Module):
    """Learnable spectral masking: predicts positive multiplicative factors
    for per-channel STFT amplitudes and never touches phases."""

    def __init__(self, cfg: GeneratorConfig, in_channels: int):
        super().__init__()
        self.stft = TorchStft(cfg.masknet_stft)
        self.unet = UNet2d(in_channels, in_channels, cfg.masknet_widths, cfg.masknet_depth)
        self.hop = cfg.masknet_stft.hop

    def forward(self, streams: torch.Tensor, mask_override=None) -> torch.Tensor:
        """(B, m, T) -> (B, T); channels are merged by an unweighted sum."""
        length = streams.shape[-1]
        if length % self.hop != 0:
            raise ValueError(f"input length {length} must be a multiple of hop {self.hop}")
        spec = self.stft.transform(streams)
        if mask_override is None:
            log_amp = torch.log(torch.clamp(torch.abs(spec), min=1e-5))
            factors = F.softplus(self.unet(log_amp))
        else:
            factors = torch.as_tensor(mask_override, dtype=spec.real.dtype).expand_as(spec.real)
        masked = spec * factors  # real positive factor: amplitude scaled, phase kept
        out = self.stft.inverse(masked, length)
        return out.sum(dim=1)

    def masked_spectrum(self, streams: torch.Tensor, mask_override=None):
        """Pre-merge masked STFT, for phase-preservation checks."""
        spec = self.stft.transform(streams)
        if mask_override is None:
            log_amp = torch.log(torch.clamp(torch.abs(spec), min=1e-5))
            factors = F.softplus(self.unet(log_amp))
        else:
            factors = torch.as_tensor(mask_override, dtype=spec.real.dtype).expand_as(spec.real)
        return spec, spec * factors


class Generator(nn.Module):
    """Full restoration generator over (B, T) waveform batches."""

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        fb = MelFilterbank(sample_rate=cfg.sample_rate, n_fft=cfg.stft.n_fft, n_mels=cfg.n_mels)
        self.mel = TorchMel(fb, cfg.stft)
        self.spectral_unet = SpectralUNet(cfg) if cfg.use_spectral_unet else None
        self.upsampler = Upsampler(cfg)
        streams_in = cfg.upsampler.out_channels + (1 if cfg.concat_input else 0)
        self.wave_unet = WaveUNet(cfg, streams_in) if cfg.use_wave_unet else None
        mask_in = cfg.wave_unet_out_channels if cfg.use_wave_unet else streams_in
        self.spectral_masknet = (
            SpectralMaskNet(cfg, mask_in) if cfg.use_spectral_masknet else None
        )
        init_weights(self)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 2:
            raise ValueError(f"expected (batch, time) input, got shape {tuple(x.shape)}")
        length = x.shape[-1]
        mult = self.cfg.length_multiple
        if length % mult != 0:
            pad = mult - length % mult
            x_padded = F.pad(x.unsqueeze(1), (0, pad), mode="reflect").squeeze(1)
        else:
            x_padded = x
        feat = self.mel(x_padded)
        if self.spectral_unet is not None:
            feat = self.spectral_unet(feat)
        streams = self.upsampler(feat)
        if self.cfg.concat_input:
            streams = torch.cat([streams, x_padded.unsqueeze(1)], dim=1)
        if self.wave_unet is not None:
            streams = self.wave_unet(streams)
        if self.spectral_masknet is not None:
            out = self.spectral_masknet(streams)
        else:
            out = streams.sum(dim=1)
        return out[:, :length]

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())
