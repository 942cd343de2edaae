"""Waveform discriminators.

The default ensemble is k identical single-resolution discriminators (SSD):
the classic multi-scale sub-discriminator topology without the pooling
front-end and with hidden channel widths divided by 4. Reference multi-scale
(MSD) and multi-period (MPD) builders are kept for the ablation harness.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn
from torch.nn.utils.parametrizations import spectral_norm, weight_norm

import math

from .unet import init_conv

LRELU_SLOPE = 0.1

# base schedule of the multi-scale sub-discriminator:
# (out_channels, kernel, stride, groups); divisor applies to hidden widths only
_BASE_SCHEDULE = (
    (16, 15, 1, 1),
    (64, 41, 4, 4),
    (256, 41, 4, 16),
    (1024, 41, 4, 64),
    (1024, 41, 4, 256),
    (1024, 5, 1, 1),
)


@dataclass(frozen=True)
class DiscriminatorConfig:
    kind: str = "ssd"  # ssd | msd | mpd
    k: int = 3
    channel_divisor: int = 4
    spectral_norm_first: bool = False  # msd only

    def __post_init__(self):
        if self.kind not in ("ssd", "msd", "mpd"):
            raise ValueError(f"unknown discriminator kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.channel_divisor < 1:
            raise ValueError("channel_divisor must be >= 1")


@dataclass
class DiscriminatorOutput:
    score: torch.Tensor  # patch-level logits
    features: list  # hidden activations, one per conv layer


class ScaleDiscriminator(nn.Module):
    """One waveform discriminator: strided grouped convs with leaky ReLU."""

    def __init__(self, channel_divisor=1, norm="weight"):
        super().__init__()
        apply_norm = spectral_norm if norm == "spectral" else weight_norm
        convs = []
        in_ch = 1
        for out_ch, kernel, stride, groups in _BASE_SCHEDULE:
            hidden = max(out_ch // channel_divisor, 1)
            groups = math.gcd(math.gcd(groups, in_ch), hidden)
            convs.append(
                apply_norm(
                    init_conv(nn.Conv1d(in_ch, hidden, kernel, stride=stride, groups=groups,
                                        padding=kernel // 2))
                )
            )
            in_ch = hidden
        self.convs = nn.ModuleList(convs)
        self.post = apply_norm(init_conv(nn.Conv1d(in_ch, 1, 3, padding=1)))

    def forward(self, x: torch.Tensor) -> DiscriminatorOutput:
        if x.dim() == 2:
            x = x.unsqueeze(1)
        if x.shape[0] == 0:
            raise ValueError("empty batch")
        features = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), LRELU_SLOPE)
            features.append(x)
        score = self.post(x).flatten(1)
        return DiscriminatorOutput(score=score, features=features)


class PeriodDiscriminator(nn.Module):
    """2D discriminator over a periodic reshaping of the waveform."""

    _CHANNELS = (32, 128, 512, 1024)

    def __init__(self, period: int):
        super().__init__()
        self.period = period
        convs = []
        in_ch = 1
        for out_ch in self._CHANNELS:
            convs.append(
                weight_norm(init_conv(nn.Conv2d(in_ch, out_ch, (5, 1), stride=(3, 1),
                                                padding=(2, 0))))
            )
            in_ch = out_ch
        convs.append(weight_norm(init_conv(nn.Conv2d(in_ch, 1024, (5, 1), padding=(2, 0)))))
        self.convs = nn.ModuleList(convs)
        self.post = weight_norm(init_conv(nn.Conv2d(1024, 1, (3, 1), padding=(1, 0))))

    def forward(self, x: torch.Tensor) -> DiscriminatorOutput:
        if x.dim() == 2:
            x = x.unsqueeze(1)
        if x.shape[0] == 0:
            raise ValueError("empty batch")
        b, c, t = x.shape
        if t % self.period != 0:
            x = F.pad(x, (0, self.period - t % self.period), mode="reflect")
            t = x.shape[-1]
        x = x.view(b, c, t // self.period, self.period)
        features = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), LRELU_SLOPE)
            features.append(x)
        score = self.post(x).flatten(1)
        return DiscriminatorOutput(score=score, features=features)


class PooledScaleDiscriminator(nn.Module):
    """MSD member: full-width scale discriminator behind n average-pool stages."""

    def __init__(self, pool_stages: int, norm="weight"):
        super().__init__()
        self.pools = nn.ModuleList(
            [nn.AvgPool1d(4, stride=2, padding=1, count_include_pad=False)
             for _ in range(pool_stages)]
        )
        self.disc = ScaleDiscriminator(channel_divisor=1, norm=norm)

    def forward(self, x: torch.Tensor) -> DiscriminatorOutput:
        if x.dim() == 2:
            x = x.unsqueeze(1)
        for pool in self.pools:
            x = pool(x)
        return self.disc(x)


class DiscriminatorEnsemble(nn.Module):
    """Independent members applied in a stable order."""

    def __init__(self, members):
        super().__init__()
        self.members = nn.ModuleList(members)

    def __len__(self):
        return len(self.members)

    def forward(self, x: torch.Tensor) -> list:
        return [member(x) for member in self.members]


def build_discriminators(cfg: DiscriminatorConfig, seed: int | None = None) -> DiscriminatorEnsemble:
    """Build the configured ensemble. SSD members share architecture and
    differ only in initialization."""
    if seed is not None:
        torch.manual_seed(seed)
    if cfg.kind == "ssd":
        members = [ScaleDiscriminator(cfg.channel_divisor) for _ in range(cfg.k)]
    elif cfg.kind == "msd":
        members = [
            PooledScaleDiscriminator(
                i, norm="spectral" if (i == 0 and cfg.spectral_norm_first) else "weight"
            )
            for i in range(3)
        ]
    else:  # mpd
        members = [PeriodDiscriminator(p) for p in (2, 3, 5, 7, 11)]
    return DiscriminatorEnsemble(members)
