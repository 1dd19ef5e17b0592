"""Identity embedders.

Training uses a frozen embedding network: either a seed-derived random conv
net (the default at desk scale, standing in for a pretrained recognizer) or an
external TorchScript module. Both are frozen; gradients flow through their
input but never into their weights. The sprite-oracle embedder reads identity
straight from sprite parameters (or inverse-renders them from pixels) and is
for evaluation only: it is numpy-based and not differentiable.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import Sample, tensor_to_image
from .sprites import (
    A_RANGE,
    B_RANGE,
    NOSE_RANGE,
    SKIN_RANGE,
    SPACING_RANGE,
    SpriteParams,
    analyze_image,
    features_from_params,
)


class FrozenConvEmbedder(nn.Module):
    """Seed-deterministic random conv net, frozen at construction.

    Weights are drawn under a forked RNG so the embedding is a pure function
    of (seed, architecture) regardless of the ambient RNG state.
    """

    def __init__(self, d_emb: int = 64, native_res: int = 64, seed: int = 0):
        super().__init__()
        self.d_emb = d_emb
        self.native_res = native_res
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            self.convs = nn.ModuleList([
                nn.Conv2d(3, 16, 3, stride=2, padding=1),
                nn.Conv2d(16, 32, 3, stride=2, padding=1),
                nn.Conv2d(32, 64, 3, stride=2, padding=1),
                nn.Conv2d(64, 64, 3, stride=2, padding=1),
            ])
            self.fc = nn.Linear(64, d_emb)
        self.requires_grad_(False)

    def embed(self, img: torch.Tensor) -> torch.Tensor:
        if img.dim() != 4 or img.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W), got {tuple(img.shape)}")
        if img.shape[2:] != (self.native_res, self.native_res):
            img = F.interpolate(img, size=(self.native_res, self.native_res),
                                mode="bilinear", align_corners=False)
        x = img
        for conv in self.convs:
            x = F.leaky_relu(conv(x), 0.2)
        return self.fc(x.mean(dim=(2, 3)))

    forward = embed


class ScriptedEmbedder(nn.Module):
    """External recognizer loaded from a TorchScript file, frozen."""

    def __init__(self, path: str, d_emb: int, native_res: int):
        super().__init__()
        self.module = torch.jit.load(path)
        self.d_emb = d_emb
        self.native_res = native_res
        for p in self.module.parameters():
            p.requires_grad_(False)

    def embed(self, img: torch.Tensor) -> torch.Tensor:
        if img.dim() != 4 or img.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W), got {tuple(img.shape)}")
        if img.shape[2:] != (self.native_res, self.native_res):
            img = F.interpolate(img, size=(self.native_res, self.native_res),
                                mode="bilinear", align_corners=False)
        return self.module(img)

    forward = embed


def _standardize(v: float, lo: float, hi: float) -> float:
    mid = (lo + hi) / 2.0
    half = (hi - lo) / 2.0
    return (v - mid) / half


class SpriteOracleEmbedder:
    """Analytic identity embedding from sprite parameters or pixels.

    Produces an 8-dim L2-normalized vector of standardized identity fields
    (skin color, face axes, eye spacing, nose length) plus a constant
    component that keeps cosine similarity sensitive to feature magnitudes.
    Geometry is down-weighted because image-side estimates of it are noisier
    than color.
    """

    d_emb = 8
    GEOM_WEIGHT = 0.5

    def embed_one(self, item) -> np.ndarray:
        if isinstance(item, Sample):
            if item.sprite is not None:
                feats = features_from_params(item.sprite)
            else:
                feats = analyze_image(tensor_to_image(item.image))
        elif isinstance(item, SpriteParams):
            feats = features_from_params(item)
        elif isinstance(item, torch.Tensor):
            feats = analyze_image(tensor_to_image(item))
        elif isinstance(item, np.ndarray):
            feats = analyze_image(item)
        else:
            raise TypeError(f"cannot embed {type(item).__name__}")
        skin = [_standardize(c, *SKIN_RANGE) for c in feats.skin_color]
        geom = [
            _standardize(feats.a, *A_RANGE),
            _standardize(feats.b, *B_RANGE),
            _standardize(feats.eye_spacing, *SPACING_RANGE),
            _standardize(feats.nose_len, *NOSE_RANGE),
        ]
        geom = [0.0 if not np.isfinite(g) else g for g in geom]
        vec = np.asarray(skin + [self.GEOM_WEIGHT * g for g in geom] + [1.0], dtype=np.float64)
        return vec / np.linalg.norm(vec)

    def embed(self, items) -> np.ndarray:
        if isinstance(items, torch.Tensor) and items.dim() == 4 and items.shape[0] > 1:
            items = [items[i: i + 1] for i in range(items.shape[0])]
        if isinstance(items, (list, tuple)):
            return np.stack([self.embed_one(it) for it in items])
        return self.embed_one(items)[None, :]
