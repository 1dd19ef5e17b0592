"""Conditional discriminator over (image, landmark image) pairs and GAN losses."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import BlockSpec, ResidualBlock


class PairDiscriminator(nn.Module):
    """Five downsampling residual blocks on the 6-channel pair, then a linear head."""

    def __init__(self, widths: tuple[int, ...] = (32, 64, 128, 256, 256)):
        super().__init__()
        if len(widths) != 5:
            raise ValueError(f"need five widths, got {widths}")
        blocks = []
        prev = 6
        for w in widths:
            blocks.append(ResidualBlock(BlockSpec(prev, w, downsample=True)))
            prev = w
        self.blocks = nn.ModuleList(blocks)
        self.head = nn.Linear(prev, 1)

    def forward(self, img: torch.Tensor, lmk_image: torch.Tensor) -> torch.Tensor:
        if img.shape[1] != 3 or lmk_image.shape[1] != 3:
            raise ValueError("discriminator expects 3-channel image and landmark image")
        if img.shape[0] != lmk_image.shape[0] or img.shape[2:] != lmk_image.shape[2:]:
            raise ValueError(
                f"image {tuple(img.shape)} and landmark image {tuple(lmk_image.shape)} disagree"
            )
        x = torch.cat([img, lmk_image], dim=1)
        for blk in self.blocks:
            x = blk(x)
        x = F.leaky_relu(x, 0.2).mean(dim=(2, 3))
        return self.head(x)


def d_loss(disc: PairDiscriminator, real: tuple[torch.Tensor, torch.Tensor],
           fake: tuple[torch.Tensor, torch.Tensor]) -> torch.Tensor:
    """Discriminator objective for one swap direction; fakes are detached here.

    softplus(-D(real)) + softplus(D(fake)), each batch-averaged. At zero
    logits this is 2*ln 2.
    """
    real_img, real_lmk = real
    fake_img, fake_lmk = fake
    batch = real_img.shape[0]
    logits = disc(
        torch.cat([real_img, fake_img.detach()]),
        torch.cat([real_lmk, fake_lmk.detach()]),
    )
    real_logits, fake_logits = logits[:batch], logits[batch:]
    return F.softplus(-real_logits).mean() + F.softplus(fake_logits).mean()


def g_adv_loss(disc: PairDiscriminator, fake: tuple[torch.Tensor, torch.Tensor],
               saturating: bool = False) -> torch.Tensor:
    """Generator adversarial objective for one swap direction.

    Non-saturating by default: softplus(-D(fake)), which is ln 2 at zero
    logits. The saturating flag restores the literal min-max form
    -softplus(D(fake)).
    """
    fake_img, fake_lmk = fake
    logits = disc(fake_img, fake_lmk)
    if saturating:
        return -F.softplus(logits).mean()
    return F.softplus(-logits).mean()
