"""Mask-guided feature normalization with identity and landmark modulation.

This is the core of the swap decoder. Each decoder layer, instead of plain
instance norm, runs:

    z       = n * S                       mask out everything but the swap area
    n_bar   = (z - mu) / (sigma + eps)    mu, sigma over the full H*W extent
    m       = alpha * n_bar + beta        per-channel, from the identity code
    p       = gamma(L) * m + delta(L)     per-pixel, from the landmark image
    n_out   = n * (1 - S) + p             paste the stylized area back

The statistics are deliberately computed over the full spatial extent of the
zero-filled masked map, not the mask support, so the mask fraction itself is
part of the normalization. alpha/beta come from a two-layer fully connected
net on the identity code; gamma/delta come from a two-layer conv net on the
landmark image, resized to the feature resolution with area averaging.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import resize_mask

FUSE_MODES = ("verbatim", "masked_injection")


def masked_instance_norm(n: torch.Tensor, S: torch.Tensor, eps: float = 1e-5):
    """Normalize the masked map by its full-extent statistics.

    S is broadcast against n and must be binary. Returns (n_bar, mu, sigma)
    where mu/sigma have shape (B, C, 1, 1).
    """
    if n.dim() != 4:
        raise ValueError(f"expected (B, C, H, W), got {tuple(n.shape)}")
    z = n * S
    mu = z.mean(dim=(2, 3), keepdim=True)
    var = ((z - mu) ** 2).mean(dim=(2, 3), keepdim=True)
    # The clamp keeps the backward finite when the variance is exactly zero
    # (sqrt has infinite slope at 0); forward values move by at most 1e-12.
    sigma = torch.sqrt(var.clamp_min(1e-24))
    n_bar = (z - mu) / (sigma + eps)
    return n_bar, mu, sigma


def fuse(n: torch.Tensor, p: torch.Tensor, S: torch.Tensor, mode: str = "verbatim") -> torch.Tensor:
    """Recombine the stylized swap area with the untouched outside."""
    if mode == "verbatim":
        return n * (1.0 - S) + p
    if mode == "masked_injection":
        return n * (1.0 - S) + p * S
    raise ValueError(f"unknown fuse mode {mode!r}; expected one of {FUSE_MODES}")


class GuidedNorm(nn.Module):
    """One mask/identity/landmark guided normalization layer.

    `use_mask=False` degrades to plain full-map instance norm and drops the
    fuse step (the mask argument is never read); `use_landmarks=False` makes
    the landmark stage the identity map (the landmark argument is never read).
    """

    def __init__(
        self,
        channels: int,
        d_id: int,
        lmk_hidden: int = 64,
        eps: float = 1e-5,
        fuse_mode: str = "verbatim",
        use_mask: bool = True,
        use_landmarks: bool = True,
    ):
        super().__init__()
        if fuse_mode not in FUSE_MODES:
            raise ValueError(f"unknown fuse mode {fuse_mode!r}")
        self.channels = channels
        self.eps = eps
        self.fuse_mode = fuse_mode
        self.use_mask = use_mask
        self.use_landmarks = use_landmarks

        self.id_fc1 = nn.Linear(d_id, 2 * d_id)
        self.id_fc2 = nn.Linear(2 * d_id, 2 * channels)
        # Start near the identity transform: scales ~1, shifts ~0.
        nn.init.zeros_(self.id_fc2.bias)
        with torch.no_grad():
            self.id_fc2.bias[:channels] = 1.0

        if use_landmarks:
            self.lmk_shared = nn.Conv2d(3, lmk_hidden, 3, padding=1)
            self.lmk_scale = nn.Conv2d(lmk_hidden, channels, 3, padding=1)
            self.lmk_shift = nn.Conv2d(lmk_hidden, channels, 3, padding=1)
            nn.init.ones_(self.lmk_scale.bias)
            nn.init.zeros_(self.lmk_shift.bias)

    def modulate_identity(self, n_bar: torch.Tensor, id_code: torch.Tensor) -> torch.Tensor:
        if id_code.dim() != 2 or id_code.shape[0] != n_bar.shape[0]:
            raise ValueError(f"identity code shape {tuple(id_code.shape)} does not match features")
        ab = self.id_fc2(F.leaky_relu(self.id_fc1(id_code), 0.2))
        alpha, beta = ab[:, : self.channels], ab[:, self.channels:]
        return alpha[:, :, None, None] * n_bar + beta[:, :, None, None]

    def modulate_landmarks(self, m: torch.Tensor, lmk_image: torch.Tensor) -> torch.Tensor:
        if not self.use_landmarks:
            return m
        h, w = m.shape[2:]
        if lmk_image.shape[2:] != (h, w):
            lmk_image = F.interpolate(lmk_image, size=(h, w), mode="area")
        hidden = F.leaky_relu(self.lmk_shared(lmk_image), 0.2)
        return self.lmk_scale(hidden) * m + self.lmk_shift(hidden)

    def forward(self, n: torch.Tensor, id_code: torch.Tensor, mask: torch.Tensor,
                lmk_image: torch.Tensor) -> torch.Tensor:
        if n.shape[1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {n.shape[1]}")
        h, w = n.shape[2:]
        if self.use_mask:
            S = resize_mask(mask, h, w)
            n_bar, _, _ = masked_instance_norm(n, S, self.eps)
        else:
            S = None
            n_bar, _, _ = masked_instance_norm(n, torch.ones((), dtype=n.dtype, device=n.device), self.eps)
        m = self.modulate_identity(n_bar, id_code)
        p = self.modulate_landmarks(m, lmk_image)
        if not self.use_mask:
            return p
        return fuse(n, p, S, self.fuse_mode)
