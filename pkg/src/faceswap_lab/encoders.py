"""Attribute and identity encoders.

The attribute encoder keeps a multi-scale pyramid of skip features for the
decoder; the identity encoder compresses a face into a single latent vector.
Neither output is normalized: the decoder's modulation layers and the cosine
identity loss both handle scale themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .blocks import BlockSpec, ResidualBlock


@dataclass
class AttributePyramid:
    """Bottleneck feature map plus per-scale skips, shallowest first.

    skips[i] has stride 2**(i+1) relative to the input image; the bottleneck
    shares the stride of the deepest skip.
    """

    bottleneck: torch.Tensor
    skips: list[torch.Tensor]


class AttributeEncoder(nn.Module):
    """Five downsampling residual blocks plus two bottleneck blocks."""

    def __init__(self, widths: tuple[int, ...] = (32, 64, 128, 256, 256), in_ch: int = 3):
        super().__init__()
        if len(widths) != 5:
            raise ValueError(f"need five widths, got {widths}")
        self.widths = tuple(widths)
        downs = []
        prev = in_ch
        for w in widths:
            downs.append(ResidualBlock(BlockSpec(prev, w, downsample=True)))
            prev = w
        self.downs = nn.ModuleList(downs)
        self.bottlenecks = nn.ModuleList([
            ResidualBlock(BlockSpec(prev, prev)),
            ResidualBlock(BlockSpec(prev, prev)),
        ])

    def forward(self, img: torch.Tensor) -> AttributePyramid:
        if img.dim() != 4 or img.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W), got {tuple(img.shape)}")
        if img.shape[2] % 32 or img.shape[3] % 32:
            raise ValueError(f"input spatial size must be divisible by 32, got {tuple(img.shape)}")
        skips = []
        x = img
        for blk in self.downs:
            x = blk(x)
            skips.append(x)
        for blk in self.bottlenecks:
            x = blk(x)
        return AttributePyramid(bottleneck=x, skips=skips)


class IdentityEncoder(nn.Module):
    """Six downsampling residual blocks, a global conv, and a linear head.

    The global conv kernel equals resolution // 64, so the spatial extent is
    1x1 before the linear map for any supported input size; the input spatial
    size must match the configured resolution.
    """

    def __init__(
        self,
        resolution: int = 64,
        d_id: int = 64,
        widths: tuple[int, ...] = (32, 64, 128, 256, 256, 256),
        in_ch: int = 3,
    ):
        super().__init__()
        if len(widths) != 6:
            raise ValueError(f"need six widths, got {widths}")
        if resolution % 64:
            raise ValueError(f"resolution {resolution} must be divisible by 64")
        self.resolution = resolution
        self.d_id = d_id
        downs = []
        prev = in_ch
        for w in widths:
            downs.append(ResidualBlock(BlockSpec(prev, w, downsample=True)))
            prev = w
        self.downs = nn.ModuleList(downs)
        self.global_conv = nn.Conv2d(prev, prev, kernel_size=resolution // 64)
        self.fc = nn.Linear(prev, d_id)

    def forward(self, img: torch.Tensor) -> torch.Tensor:
        if img.dim() != 4 or img.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W), got {tuple(img.shape)}")
        if img.shape[2] != self.resolution or img.shape[3] != self.resolution:
            raise ValueError(
                f"identity encoder built for {self.resolution}px inputs, got {tuple(img.shape)}"
            )
        x = img
        for blk in self.downs:
            x = blk(x)
        x = torch.nn.functional.leaky_relu(self.global_conv(x), 0.2)
        return self.fc(x.flatten(1))
