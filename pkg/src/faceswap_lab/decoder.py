"""Swap decoder: residual upsampling blocks with guided normalization.

Every block swaps its two instance norms for GuidedNorm layers driven by the
identity code, the target swap-area mask and the target landmark image. Skip
features from the attribute encoder are concatenated before each upsampling
block, and the per-block outputs are kept as an activation trace for the
attribute loss.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import resize_mask
from .encoders import AttributePyramid
from .normalization import GuidedNorm


class SwapBlock(nn.Module):
    """Residual block whose norms are guided; upsampling happens mid-block."""

    def __init__(
        self,
        in_ch: int,
        out_ch: int,
        upsample: bool,
        d_id: int,
        lmk_hidden: int = 64,
        fuse_mode: str = "verbatim",
        use_mask: bool = True,
        use_landmarks: bool = True,
    ):
        super().__init__()
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.upsample = upsample
        kw = dict(d_id=d_id, lmk_hidden=lmk_hidden, fuse_mode=fuse_mode,
                  use_mask=use_mask, use_landmarks=use_landmarks)
        self.guided1 = GuidedNorm(in_ch, **kw)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.guided2 = GuidedNorm(out_ch, **kw)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        # Damp the residual branch at init so the shortcut carries most of
        # the signal early on; the branch grows back as conv2 trains.
        with torch.no_grad():
            self.conv2.weight.mul_(0.1)
            self.conv2.bias.zero_()
        self.learned_shortcut = in_ch != out_ch or upsample
        if self.learned_shortcut:
            self.conv_s = nn.Conv2d(in_ch, out_ch, 1, bias=False)

    def forward(self, x: torch.Tensor, id_code: torch.Tensor, mask: torch.Tensor,
                lmk_image: torch.Tensor, skip: torch.Tensor | None = None,
                guidance=None) -> torch.Tensor:
        if skip is not None:
            if skip.shape[2:] != x.shape[2:]:
                raise ValueError(
                    f"skip spatial {tuple(skip.shape[2:])} != feature spatial {tuple(x.shape[2:])}"
                )
            x = torch.cat([x, skip], dim=1)
        if x.shape[1] != self.in_ch:
            raise ValueError(f"expected {self.in_ch} input channels, got {x.shape[1]}")
        at = guidance if guidance is not None else lambda h, w: (mask, lmk_image)

        m1, l1 = at(*x.shape[2:])
        h = self.guided1(x, id_code, m1, l1)
        h = self.conv1(F.leaky_relu(h, 0.2))
        if self.upsample:
            h = F.interpolate(h, scale_factor=2, mode="nearest")
        m2, l2 = at(*h.shape[2:])
        h = self.guided2(h, id_code, m2, l2)
        h = self.conv2(F.leaky_relu(h, 0.2))

        s = self.conv_s(x) if self.learned_shortcut else x
        if self.upsample:
            s = F.interpolate(s, scale_factor=2, mode="nearest")
        return s + h


class FusionDecoder(nn.Module):
    """Two bottleneck swap blocks, five upsampling swap blocks, 1x1 conv, tanh.

    forward returns (image, trace) where trace lists the seven post-block
    feature maps, deepest first.
    """

    def __init__(
        self,
        widths: tuple[int, ...] = (32, 64, 128, 256, 256),
        d_id: int = 64,
        lmk_hidden: int = 64,
        fuse_mode: str = "verbatim",
        use_mask: bool = True,
        use_landmarks: bool = True,
    ):
        super().__init__()
        if len(widths) != 5:
            raise ValueError(f"need five widths, got {widths}")
        c1, c2, c3, c4, c5 = widths
        self.use_mask = use_mask
        self.use_landmarks = use_landmarks
        kw = dict(d_id=d_id, lmk_hidden=lmk_hidden, fuse_mode=fuse_mode,
                  use_mask=use_mask, use_landmarks=use_landmarks)
        self.blocks = nn.ModuleList([
            SwapBlock(c5, c5, upsample=False, **kw),
            SwapBlock(c5, c5, upsample=False, **kw),
            SwapBlock(2 * c5, c4, upsample=True, **kw),
            SwapBlock(2 * c4, c3, upsample=True, **kw),
            SwapBlock(2 * c3, c2, upsample=True, **kw),
            SwapBlock(2 * c2, c1, upsample=True, **kw),
            SwapBlock(2 * c1, c1, upsample=True, **kw),
        ])
        self.out_conv = nn.Conv2d(c1, 3, 1)

    def forward(self, pyramid: AttributePyramid, id_code: torch.Tensor,
                mask: torch.Tensor, lmk_image: torch.Tensor):
        x = pyramid.bottleneck
        if len(pyramid.skips) != 5:
            raise ValueError(f"need a 5-level pyramid, got {len(pyramid.skips)} skips")
        if mask.shape[2:] != lmk_image.shape[2:]:
            raise ValueError("mask and landmark image spatial sizes differ")
        skips = list(reversed(pyramid.skips))

        # The same guidance resolutions recur across blocks; resize each once
        # per pass. Inputs a guided norm never reads are passed through as is.
        sized: dict[tuple[int, int], tuple[torch.Tensor, torch.Tensor]] = {}

        def guidance(h: int, w: int) -> tuple[torch.Tensor, torch.Tensor]:
            key = (h, w)
            if key not in sized:
                m = resize_mask(mask, h, w) if self.use_mask else mask
                l = lmk_image
                if self.use_landmarks and lmk_image.shape[2:] != key:
                    l = F.interpolate(lmk_image, size=key, mode="area")
                sized[key] = (m, l)
            return sized[key]

        trace = []
        for i, blk in enumerate(self.blocks):
            skip = None if i < 2 else skips[i - 2]
            x = blk(x, id_code, mask, lmk_image, skip=skip, guidance=guidance)
            trace.append(x)
        img = torch.tanh(self.out_conv(x))
        if img.shape[2:] != mask.shape[2:]:
            raise ValueError(
                f"decoded {tuple(img.shape[2:])} but guidance is {tuple(mask.shape[2:])}"
            )
        return img, trace
