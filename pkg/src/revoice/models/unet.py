"""Encoder-decoder convolution blocks shared by the 1D and 2D subnetworks."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

LRELU_SLOPE = 0.1


class ConvBlock1d(nn.Module):
    """`depth` conv layers; the last one is strided when downsampling."""

    def __init__(self, in_ch, out_ch, kernel, depth, down_stride=1):
        super().__init__()
        pad = kernel // 2
        layers = [nn.Conv1d(in_ch, out_ch, kernel, padding=pad)]
        for _ in range(depth - 2):
            layers.append(nn.Conv1d(out_ch, out_ch, kernel, padding=pad))
        if down_stride > 1:
            layers.append(nn.Conv1d(out_ch, out_ch, down_stride, stride=down_stride))
        else:
            layers.append(nn.Conv1d(out_ch, out_ch, kernel, padding=pad))
        self.convs = nn.ModuleList(layers)

    def forward(self, x):
        for conv in self.convs[:-1]:
            x = F.leaky_relu(conv(x), LRELU_SLOPE)
        skip = x
        return F.leaky_relu(self.convs[-1](x), LRELU_SLOPE), skip


class UpBlock1d(nn.Module):
    """Transposed-conv upsample, concat skip, then depth-1 convs."""

    def __init__(self, in_ch, out_ch, kernel, depth, up_stride):
        super().__init__()
        pad = kernel // 2
        self.up = nn.ConvTranspose1d(in_ch, out_ch, up_stride, stride=up_stride)
        convs = [nn.Conv1d(2 * out_ch, out_ch, kernel, padding=pad)]
        for _ in range(depth - 2):
            convs.append(nn.Conv1d(out_ch, out_ch, kernel, padding=pad))
        self.convs = nn.ModuleList(convs)

    def forward(self, x, skip):
        x = F.leaky_relu(self.up(x), LRELU_SLOPE)
        x = torch.cat([x, skip], dim=1)
        for conv in self.convs:
            x = F.leaky_relu(conv(x), LRELU_SLOPE)
        return x


class UNet1d(nn.Module):
    """Four-level 1D UNet; each level downsamples time by `stride`."""

    def __init__(self, in_ch, out_ch, widths, depth=4, kernel=5, stride=4):
        super().__init__()
        if list(widths) != sorted(widths) or len(set(widths)) != len(widths):
            raise ValueError(f"widths must be strictly increasing, got {widths}")
        self.stride = stride
        self.total_stride = stride ** len(widths)
        downs = []
        ch = in_ch
        for w in widths:
            downs.append(ConvBlock1d(ch, w, kernel, depth, down_stride=stride))
            ch = w
        self.downs = nn.ModuleList(downs)
        self.mid = nn.Conv1d(ch, ch, kernel, padding=kernel // 2)
        ups = []
        for w_out in reversed(widths):
            ups.append(UpBlock1d(ch, w_out, kernel, depth, up_stride=stride))
            ch = w_out
        self.ups = nn.ModuleList(ups)
        self.out = nn.Conv1d(ch, out_ch, kernel, padding=kernel // 2)

    def forward(self, x):
        if x.shape[-1] % self.total_stride != 0:
            raise ValueError(
                f"input length {x.shape[-1]} must be a multiple of {self.total_stride}"
            )
        skips = []
        for down in self.downs:
            x, skip = down(x)
            skips.append(skip)
        x = F.leaky_relu(self.mid(x), LRELU_SLOPE)
        for up, skip in zip(self.ups, reversed(skips)):
            x = up(x, skip)
        return self.out(x)


class ConvBlock2d(nn.Module):
    def __init__(self, in_ch, out_ch, depth, down_stride=1):
        super().__init__()
        layers = [nn.Conv2d(in_ch, out_ch, 3, padding=1)]
        for _ in range(depth - 2):
            layers.append(nn.Conv2d(out_ch, out_ch, 3, padding=1))
        if down_stride > 1:
            layers.append(nn.Conv2d(out_ch, out_ch, down_stride, stride=down_stride))
        else:
            layers.append(nn.Conv2d(out_ch, out_ch, 3, padding=1))
        self.convs = nn.ModuleList(layers)

    def forward(self, x):
        for conv in self.convs[:-1]:
            x = F.leaky_relu(conv(x), LRELU_SLOPE)
        skip = x
        return F.leaky_relu(self.convs[-1](x), LRELU_SLOPE), skip


class UpBlock2d(nn.Module):
    def __init__(self, in_ch, out_ch, depth):
        super().__init__()
        self.up = nn.ConvTranspose2d(in_ch, out_ch, 2, stride=2)
        convs = [nn.Conv2d(2 * out_ch, out_ch, 3, padding=1)]
        for _ in range(depth - 2):
            convs.append(nn.Conv2d(out_ch, out_ch, 3, padding=1))
        self.convs = nn.ModuleList(convs)

    def forward(self, x, skip):
        x = F.leaky_relu(self.up(x), LRELU_SLOPE)
        x = torch.cat([x, skip], dim=1)
        for conv in self.convs:
            x = F.leaky_relu(conv(x), LRELU_SLOPE)
        return x


class UNet2d(nn.Module):
    """Four-level 2D UNet with 3x3 kernels; each level halves both axes.

    Inputs are reflect-padded to a multiple of the total stride (16) on both
    axes and cropped back, so any spatial size is accepted.
    """

    def __init__(self, in_ch, out_ch, widths, depth=4):
        super().__init__()
        if list(widths) != sorted(widths) or len(set(widths)) != len(widths):
            raise ValueError(f"widths must be strictly increasing, got {widths}")
        self.total_stride = 2 ** len(widths)
        downs = []
        ch = in_ch
        for w in widths:
            downs.append(ConvBlock2d(ch, w, depth, down_stride=2))
            ch = w
        self.downs = nn.ModuleList(downs)
        self.mid = nn.Conv2d(ch, ch, 3, padding=1)
        ups = []
        for w_out in reversed(widths):
            ups.append(UpBlock2d(ch, w_out, depth))
            ch = w_out
        self.ups = nn.ModuleList(ups)
        self.out = nn.Conv2d(ch, out_ch, 3, padding=1)

    def forward(self, x):
        if min(x.shape[-2:]) <= 0:
            raise ValueError(f"non-positive spatial dims: {tuple(x.shape)}")
        h, w = x.shape[-2:]
        s = self.total_stride
        pad_h = (-h) % s
        pad_w = (-w) % s
        if pad_h or pad_w:
            mode = "reflect" if (pad_h < h and pad_w < w) else "replicate"
            x = F.pad(x, (0, pad_w, 0, pad_h), mode=mode)
        skips = []
        for down in self.downs:
            x, skip = down(x)
            skips.append(skip)
        x = F.leaky_relu(self.mid(x), LRELU_SLOPE)
        for up, skip in zip(self.ups, reversed(skips)):
            x = up(x, skip)
        return self.out(x)[..., :h, :w]


def init_conv(conv, std=0.01):
    """Zero-mean normal init; call before any norm parametrization is applied."""
    nn.init.normal_(conv.weight, mean=0.0, std=std)
    if conv.bias is not None:
        nn.init.zeros_(conv.bias)
    return conv


def init_weights(module, std=0.01):
    """Init all plain convs; parametrized (weight/spectral norm) convs are
    expected to have been initialized before wrapping."""
    from torch.nn.utils import parametrize

    for m in module.modules():
        if isinstance(
            m, (nn.Conv1d, nn.Conv2d, nn.ConvTranspose1d, nn.ConvTranspose2d)
        ) and not parametrize.is_parametrized(m):
            init_conv(m, std)
