"""Least-squares GAN objectives, feature matching, and mel reconstruction loss.

Expectations are realized as per-batch means; L1 norms are normalized by
element count so magnitudes are invariant to batch size.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass(frozen=True)
class LossWeights:
    lambda_fm: float = 2.0
    lambda_mel: float = 45.0

    def __post_init__(self):
        if self.lambda_fm < 0 or self.lambda_mel < 0:
            raise ValueError("loss weights must be non-negative")


def lsgan_d_loss(d_real: torch.Tensor, d_fake: torch.Tensor) -> torch.Tensor:
    """Squared-error loss pushing real scores to 1 and fake scores to 0."""
    return torch.mean((d_real - 1.0) ** 2) + torch.mean(d_fake**2)


def lsgan_g_loss(d_fake_scores: list) -> torch.Tensor:
    """Sum over discriminators of the mean squared distance of fake scores to 1."""
    total = None
    for scores in d_fake_scores:
        term = torch.mean((scores - 1.0) ** 2)
        total = term if total is None else total + term
    if total is None:
        raise ValueError("need at least one discriminator score tensor")
    return total


def feature_matching_loss(real_feats: list, fake_feats: list) -> torch.Tensor:
    """Sum over discriminators and layers of element-normalized L1 distances.

    real_feats / fake_feats: per-discriminator lists of layer activation lists.
    """
    if len(real_feats) != len(fake_feats):
        raise ValueError("feature lists must cover the same discriminators")
    total = torch.zeros((), dtype=torch.float64)
    for real_layers, fake_layers in zip(real_feats, fake_feats):
        if len(real_layers) != len(fake_layers):
            raise ValueError("feature lists must have matching layer counts")
        for r, f in zip(real_layers, fake_layers):
            if r.shape != f.shape:
                raise ValueError(f"feature shape mismatch: {tuple(r.shape)} vs {tuple(f.shape)}")
            total = total.to(f.dtype) + torch.mean(torch.abs(r - f))
    return total


def mel_loss(y: torch.Tensor, y_hat: torch.Tensor, mel_transform) -> torch.Tensor:
    """Mean absolute difference between log-mel spectrograms of (B, T) batches."""
    return torch.mean(torch.abs(mel_transform(y) - mel_transform(y_hat)))


def generator_total_loss(
    adv: torch.Tensor, fm: torch.Tensor, mel: torch.Tensor, weights: LossWeights
) -> torch.Tensor:
    return adv + weights.lambda_fm * fm + weights.lambda_mel * mel
