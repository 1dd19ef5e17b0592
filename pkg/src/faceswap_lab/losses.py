"""Training objectives: identity, attribute, reconstruction and their total."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .data import resize_mask


def cosine_similarity(a: torch.Tensor, b: torch.Tensor, check_norm: bool = True) -> torch.Tensor:
    """Row-wise cosine between (B, D) embeddings; zero-norm rows are an error."""
    na = a.norm(dim=1)
    nb = b.norm(dim=1)
    if check_norm and (bool((na == 0).any()) or bool((nb == 0).any())):
        raise ValueError("zero-norm embedding, cosine undefined")
    return (a * b).sum(dim=1) / (na * nb)


def identity_loss(src_img: torch.Tensor, swapped_img: torch.Tensor, embedder) -> torch.Tensor:
    """1 - cos(psi(src), psi(swapped)), batch-averaged.

    The embedder resizes to its own native resolution; gradients reach the
    swapped image but never the embedder weights.
    """
    if src_img.shape != swapped_img.shape:
        raise ValueError(
            f"source {tuple(src_img.shape)} and swap {tuple(swapped_img.shape)} disagree"
        )
    e_src = embedder.embed(src_img)
    e_swap = embedder.embed(swapped_img)
    return (1.0 - cosine_similarity(e_src, e_swap)).mean()


def attribute_loss(trace_swap: list[torch.Tensor], trace_ref: list[torch.Tensor],
                   mask: torch.Tensor) -> torch.Tensor:
    """Masked feature-matching over aligned activation traces.

    For each level, the difference outside the swap area (1 - S at that
    scale) is squared and averaged over every element, then the levels are
    summed. The per-level mean keeps deep, small maps and shallow, large maps
    on the same footing.
    """
    if len(trace_swap) != len(trace_ref):
        raise ValueError(f"trace lengths differ: {len(trace_swap)} vs {len(trace_ref)}")
    if not trace_swap:
        raise ValueError("empty activation trace")
    total = None
    for a, b in zip(trace_swap, trace_ref):
        if a.shape != b.shape:
            raise ValueError(f"trace level shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
        S = resize_mask(mask, a.shape[2], a.shape[3])
        level = (((a - b) * (1.0 - S)) ** 2).mean()
        total = level if total is None else total + level
    return total


def reconstruction_loss(recon: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Plain mean squared error."""
    if recon.shape != target.shape:
        raise ValueError(
            f"reconstruction {tuple(recon.shape)} and target {tuple(target.shape)} disagree"
        )
    return ((recon - target) ** 2).mean()


@dataclass
class LossBundle:
    """All scalar loss terms of one dual-direction training step.

    The directional sub-terms are kept for diagnostics; the headline fields
    satisfy l_total = lambda_id * l_id + lambda_attr * l_attr +
    lambda_rec * l_rec + l_adv_g by construction.
    """

    l_id: torch.Tensor
    l_attr: torch.Tensor
    l_rec: torch.Tensor
    l_adv_g: torch.Tensor
    l_total: torch.Tensor
    id_xy: torch.Tensor
    id_yx: torch.Tensor
    attr_xy: torch.Tensor
    attr_yx: torch.Tensor
    rec_x: torch.Tensor
    rec_y: torch.Tensor
    adv_xy: torch.Tensor
    adv_yx: torch.Tensor
    l_adv_d: torch.Tensor | None = None

    def terms(self) -> dict[str, float]:
        out = {}
        for name in ("l_id", "l_attr", "l_rec", "l_adv_g", "l_total", "id_xy", "id_yx",
                     "attr_xy", "attr_yx", "rec_x", "rec_y", "adv_xy", "adv_yx", "l_adv_d"):
            t = getattr(self, name)
            out[name] = float(t.detach()) if t is not None else float("nan")
        return out


def total_loss(
    id_xy: torch.Tensor, id_yx: torch.Tensor,
    attr_xy: torch.Tensor, attr_yx: torch.Tensor,
    rec_x: torch.Tensor, rec_y: torch.Tensor,
    adv_xy: torch.Tensor, adv_yx: torch.Tensor,
    lambda_id: float = 10.0, lambda_attr: float = 1.0, lambda_rec: float = 1.0,
    l_adv_d: torch.Tensor | None = None,
) -> LossBundle:
    """Combine per-direction sub-terms into the weighted generator objective."""
    l_id = id_xy + id_yx
    l_attr = attr_xy + attr_yx
    l_rec = rec_x + rec_y
    l_adv_g = adv_xy + adv_yx
    l_total = lambda_id * l_id + lambda_attr * l_attr + lambda_rec * l_rec + l_adv_g
    return LossBundle(
        l_id=l_id, l_attr=l_attr, l_rec=l_rec, l_adv_g=l_adv_g, l_total=l_total,
        id_xy=id_xy, id_yx=id_yx, attr_xy=attr_xy, attr_yx=attr_yx,
        rec_x=rec_x, rec_y=rec_y, adv_xy=adv_xy, adv_yx=adv_yx, l_adv_d=l_adv_d,
    )
