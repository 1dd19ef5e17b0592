"""One-shot progressive face swapping on synthetic sprite faces.

The generator disentangles a face into an identity code and a multi-scale
attribute pyramid, then re-synthesizes it through a decoder whose
normalization layers are guided by the swap-area mask, the identity code and
a rasterized landmark image. Training is adversarial over both swap
directions plus reconstructions. The sprite corpus ships with analytic
ground truth, so identity transfer and attribute preservation are measured
by exact oracles.
"""

from .config import TrainConfig, config_fingerprint, full_preset, load_config, save_config
from .data import (
    PairBatch,
    Sample,
    SampleDataset,
    export_dataset,
    load_sample_dir,
    make_corpus,
    make_pair_batch,
    make_sample,
    resize_mask,
    sample_eval_pairs,
)
from .decoder import FusionDecoder, SwapBlock
from .discriminator import PairDiscriminator, d_loss, g_adv_loss
from .embedder import FrozenConvEmbedder, ScriptedEmbedder, SpriteOracleEmbedder
from .encoders import AttributeEncoder, AttributePyramid, IdentityEncoder
from .landmarks import GROUP_COLORS, GROUP_ORDER, LandmarkSet, rasterize_landmarks
from .losses import (
    LossBundle,
    attribute_loss,
    identity_loss,
    reconstruction_loss,
    total_loss,
)
from .metrics import (
    EvalReport,
    Gallery,
    SpriteExpressionEstimator,
    SpritePoseEstimator,
    cluster_identities,
    evaluate,
    expression_error,
    id_retrieval,
    pose_error,
)
from .model import Generator, build_discriminators, build_embedder, build_generator
from .normalization import GuidedNorm, fuse, masked_instance_norm
from .sprites import SpriteParams, analyze_image, render_sprite, sample_params
from .swapping import SwapResult, occlusion_fuse, swap, swap_progressive
from .trainer import (
    NonFiniteLossError,
    TrainState,
    evaluate_losses,
    init_state,
    load_checkpoint,
    save_checkpoint,
    train,
    train_step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
