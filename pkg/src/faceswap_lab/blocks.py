"""Pre-activation residual blocks shared by the encoders and discriminator."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F


@dataclass(frozen=True)
class BlockSpec:
    """Shape contract for one residual block.

    Blocks that keep the resolution (bottlenecks) must also keep the channel
    count; only downsampling blocks may change width.
    """

    in_ch: int
    out_ch: int
    downsample: bool = False

    def __post_init__(self) -> None:
        if self.in_ch < 1 or self.out_ch < 1:
            raise ValueError(f"channel counts must be positive, got {self}")
        if not self.downsample and self.in_ch != self.out_ch:
            raise ValueError(f"non-downsampling block must keep width, got {self}")


class AffineInstanceNorm(nn.Module):
    """Per-sample, per-channel normalization with learned scale and shift.

    Uses the same (x - mu) / (sigma + eps) convention as the guided masked
    norm, and tolerates degenerate 1x1 maps (the deepest identity-encoder
    stage at 64px), where the normalized map is zero and only the shift
    passes through.
    """

    def __init__(self, channels: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        mu = x.mean(dim=(2, 3), keepdim=True)
        var = ((x - mu) ** 2).mean(dim=(2, 3), keepdim=True)
        # Clamp keeps the zero-variance backward finite (1x1 maps).
        sigma = torch.sqrt(var.clamp_min(1e-24))
        n = (x - mu) / (sigma + self.eps)
        return n * self.weight[:, None, None] + self.bias[:, None, None]


class ResidualBlock(nn.Module):
    """IN -> LeakyReLU -> conv3x3 -> (pool) -> IN -> LeakyReLU -> conv3x3, plus shortcut.

    The shortcut is a 1x1 conv whenever the width changes or the block
    downsamples; average pooling halves both paths, mid-block on the residual
    side so the second conv runs at the reduced resolution.
    """

    def __init__(self, spec: BlockSpec):
        super().__init__()
        self.spec = spec
        self.norm1 = AffineInstanceNorm(spec.in_ch)
        self.conv1 = nn.Conv2d(spec.in_ch, spec.out_ch, 3, padding=1)
        self.norm2 = AffineInstanceNorm(spec.out_ch)
        self.conv2 = nn.Conv2d(spec.out_ch, spec.out_ch, 3, padding=1)
        self.learned_shortcut = spec.in_ch != spec.out_ch or spec.downsample
        if self.learned_shortcut:
            self.conv_s = nn.Conv2d(spec.in_ch, spec.out_ch, 1, bias=False)

    def shortcut(self, x: torch.Tensor) -> torch.Tensor:
        s = self.conv_s(x) if self.learned_shortcut else x
        if self.spec.downsample:
            s = F.avg_pool2d(s, 2)
        return s

    def residual(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.leaky_relu(self.norm1(x), 0.2))
        if self.spec.downsample:
            h = F.avg_pool2d(h, 2)
        h = self.conv2(F.leaky_relu(self.norm2(h), 0.2))
        return h

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != self.spec.in_ch:
            raise ValueError(f"expected (B, {self.spec.in_ch}, H, W), got {tuple(x.shape)}")
        if self.spec.downsample and (x.shape[2] % 2 or x.shape[3] % 2):
            raise ValueError(f"downsampling needs even spatial size, got {tuple(x.shape)}")
        return self.shortcut(x) + self.residual(x)
