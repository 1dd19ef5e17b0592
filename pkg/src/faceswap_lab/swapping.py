"""Inference-time swapping, progressive checkpoint strips, occlusion pasting."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .data import Sample, save_image_png, tensor_to_image
from .losses import cosine_similarity
from .trainer import TrainState, load_checkpoint


@dataclass
class SwapResult:
    """Swapped image plus embedder cosines against source and target."""

    image: torch.Tensor
    similarity_to_src: float
    similarity_to_tgt: float


def _resolve_state(state_or_path) -> TrainState:
    if isinstance(state_or_path, TrainState):
        return state_or_path
    return load_checkpoint(state_or_path)


def swap(state_or_path, src: Sample, tgt: Sample) -> SwapResult:
    """Put src's identity into tgt's attributes with tgt's mask and landmarks."""
    state = _resolve_state(state_or_path)
    if src.resolution != tgt.resolution:
        raise ValueError(f"source {src.resolution} and target {tgt.resolution} disagree")
    expected = (state.cfg.resolution, state.cfg.resolution)
    if tgt.resolution != tuple(expected):
        raise ValueError(f"model expects {expected}, got {tgt.resolution}")
    gen = state.generator
    gen.eval()
    with torch.no_grad():
        img, _ = gen.swap(src.image, tgt.image, tgt.mask, tgt.lmk_image())
        e = state.embedder.embed(torch.cat([img, src.image, tgt.image]))
        sim_src = float(cosine_similarity(e[0:1], e[1:2]))
        sim_tgt = float(cosine_similarity(e[0:1], e[2:3]))
    return SwapResult(image=img, similarity_to_src=sim_src, similarity_to_tgt=sim_tgt)


def occlusion_fuse(synthetic: torch.Tensor, target: torch.Tensor,
                   mask: torch.Tensor) -> torch.Tensor:
    """Keep the synthesized swap area, take everything else from the target."""
    if synthetic.shape != target.shape:
        raise ValueError("synthetic and target shapes disagree")
    if mask.shape[2:] != target.shape[2:]:
        raise ValueError("mask spatial size disagrees with images")
    return synthetic * mask + target * (1.0 - mask)


def swap_progressive(checkpoint_paths, src: Sample, tgt: Sample, out_dir=None):
    """Swap the same pair under successive checkpoints.

    Returns (strip, rows): strip is the horizontal panel
    [src | tgt | swap@ckpt...] as (H, W_total, 3) float in [0, 1]; rows list
    (iteration, similarity_to_src, similarity_to_tgt) per checkpoint in
    ascending iteration order. With out_dir set, writes progressive.png and
    progressive.csv there.
    """
    if not checkpoint_paths:
        raise ValueError("need at least one checkpoint")
    states = [_resolve_state(p) for p in checkpoint_paths]
    states.sort(key=lambda s: s.iteration)
    panels = [tensor_to_image(src.image), tensor_to_image(tgt.image)]
    rows = []
    for state in states:
        res = swap(state, src, tgt)
        panels.append(tensor_to_image(res.image))
        rows.append((state.iteration, res.similarity_to_src, res.similarity_to_tgt))
    strip = np.concatenate(panels, axis=1)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        strip_t = torch.from_numpy(strip * 2.0 - 1.0).permute(2, 0, 1).unsqueeze(0)
        save_image_png(out / "progressive.png", strip_t)
        with open(out / "progressive.csv", "w") as fh:
            fh.write("iter,similarity_to_src,similarity_to_tgt\n")
            for it, s_src, s_tgt in rows:
                fh.write(f"{it},{s_src!r},{s_tgt!r}\n")
    return strip, rows
