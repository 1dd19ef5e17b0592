"""Generator assembly, ablation wiring and the module builders."""

from __future__ import annotations

import torch
import torch.nn as nn

from .config import TrainConfig
from .decoder import FusionDecoder
from .embedder import FrozenConvEmbedder, ScriptedEmbedder
from .encoders import AttributeEncoder, AttributePyramid, IdentityEncoder


class LearnedIdentity(nn.Module):
    """Identity code from the trainable identity encoder."""

    def __init__(self, resolution: int, d_id: int, widths: tuple[int, ...]):
        super().__init__()
        self.encoder = IdentityEncoder(resolution=resolution, d_id=d_id, widths=widths)

    def forward(self, img: torch.Tensor) -> torch.Tensor:
        return self.encoder(img)


class EmbedderIdentity(nn.Module):
    """Identity code from the frozen embedder through a learned projection.

    Used by the frozen_id ablation: the identity encoder does not exist, so
    only the projection receives gradients.
    """

    def __init__(self, embedder, d_id: int):
        super().__init__()
        self.embedder = embedder
        self.proj = nn.Linear(embedder.d_emb, d_id)

    def forward(self, img: torch.Tensor) -> torch.Tensor:
        return self.proj(self.embedder.embed(img))


class Generator(nn.Module):
    """Attribute encoder + identity branch + guided decoder."""

    def __init__(self, attr_encoder: AttributeEncoder, identity_branch: nn.Module,
                 decoder: FusionDecoder):
        super().__init__()
        self.attr_encoder = attr_encoder
        self.identity_branch = identity_branch
        self.decoder = decoder

    def encode_attributes(self, img: torch.Tensor) -> AttributePyramid:
        return self.attr_encoder(img)

    def encode_identity(self, img: torch.Tensor) -> torch.Tensor:
        return self.identity_branch(img)

    def decode(self, pyramid: AttributePyramid, id_code: torch.Tensor,
               mask: torch.Tensor, lmk_image: torch.Tensor):
        return self.decoder(pyramid, id_code, mask, lmk_image)

    def swap(self, src_img: torch.Tensor, tgt_img: torch.Tensor,
             tgt_mask: torch.Tensor, tgt_lmk: torch.Tensor):
        """Identity from src pasted into tgt's attributes. Returns (img, trace)."""
        pyramid = self.encode_attributes(tgt_img)
        id_code = self.encode_identity(src_img)
        return self.decode(pyramid, id_code, tgt_mask, tgt_lmk)


def id_encoder_widths(channels: tuple[int, ...]) -> tuple[int, ...]:
    """The identity encoder extends the shared schedule by one deepest stage."""
    return tuple(channels) + (channels[-1],)


def build_embedder(cfg: TrainConfig):
    if cfg.embedder == "random_frozen":
        return FrozenConvEmbedder(d_emb=cfg.d_emb, native_res=min(cfg.resolution, 64),
                                  seed=cfg.seed)
    if cfg.embedder == "external":
        if not cfg.embedder_path:
            raise ValueError("embedder=external needs embedder_path")
        return ScriptedEmbedder(cfg.embedder_path, d_emb=cfg.d_emb,
                                native_res=min(cfg.resolution, 112))
    raise ValueError(f"cannot build embedder {cfg.embedder!r} for training")


def build_generator(cfg: TrainConfig, embedder=None) -> Generator:
    """Assemble the generator, applying the configured ablation.

    frozen_id: identity codes come from the frozen embedder via a learned
    linear map; no identity encoder exists.
    unmasked: decoder norms ignore the mask entirely (plain instance norm,
    no fuse step).
    no_landmarks: decoder norms skip landmark modulation; the landmark input
    is never read inside the decoder.
    """
    attr = AttributeEncoder(widths=cfg.channels)
    decoder = FusionDecoder(
        widths=cfg.channels,
        d_id=cfg.d_id,
        lmk_hidden=cfg.lmk_hidden,
        fuse_mode=cfg.fuse_mode,
        use_mask=cfg.ablation != "unmasked",
        use_landmarks=cfg.ablation != "no_landmarks",
    )
    if cfg.ablation == "frozen_id":
        if embedder is None:
            embedder = build_embedder(cfg)
        identity = EmbedderIdentity(embedder, d_id=cfg.d_id)
    else:
        identity = LearnedIdentity(cfg.resolution, cfg.d_id, id_encoder_widths(cfg.channels))
    return Generator(attr, identity, decoder)


def build_discriminators(cfg: TrainConfig) -> nn.ModuleList:
    """One shared discriminator by default, two when configured."""
    from .discriminator import PairDiscriminator

    n = 2 if cfg.separate_discriminators else 1
    return nn.ModuleList([PairDiscriminator(widths=cfg.channels) for _ in range(n)])
