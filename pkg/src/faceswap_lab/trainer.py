"""Dual-direction adversarial training loop with snapshots and loss logging.

Each iteration draws a batch of cross-identity pairs (x, y), synthesizes both
swap directions and both reconstructions in one batched decoder pass, then
takes one discriminator step (fakes detached) followed by one generator step.
Checkpoints are single-file torch archives that embed the full config, so a
run can be reproduced or inspected from any snapshot alone.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .config import TrainConfig, config_fingerprint, config_from_ini, config_to_ini
from .data import PairBatch, SampleDataset, make_pair_batch
from .discriminator import d_loss, g_adv_loss
from .encoders import AttributePyramid
from .losses import LossBundle, attribute_loss, identity_loss, reconstruction_loss, total_loss
from .model import Generator, build_discriminators, build_embedder, build_generator

log = logging.getLogger(__name__)

LOSS_CSV_FIELDS = ("iter", "l_id", "l_attr", "l_rec", "l_adv_d", "l_adv_g")
LOSS_TAIL_LEN = 200


class NonFiniteLossError(RuntimeError):
    """A loss term left the finite range; carries every sub-term for diagnosis."""

    def __init__(self, iteration: int, terms: dict[str, float]):
        self.iteration = iteration
        self.terms = terms
        bad = {k: v for k, v in terms.items() if not _is_finite(v)}
        super().__init__(
            f"non-finite loss at iteration {iteration}: offending terms {bad}; all terms {terms}"
        )


def _is_finite(v: float) -> bool:
    return v == v and abs(v) != float("inf")


@dataclass
class TrainState:
    cfg: TrainConfig
    generator: Generator
    discriminators: torch.nn.ModuleList
    embedder: torch.nn.Module
    g_opt: torch.optim.Adam
    d_opt: torch.optim.Adam
    iteration: int = 0
    loss_tail: list[dict] = field(default_factory=list)


def init_state(cfg: TrainConfig) -> TrainState:
    """Seed torch and build every module in a fixed order."""
    torch.manual_seed(cfg.seed)
    embedder = build_embedder(cfg)
    generator = build_generator(cfg, embedder=embedder)
    discriminators = build_discriminators(cfg)
    g_params = [p for p in generator.parameters() if p.requires_grad]
    d_params = [p for p in discriminators.parameters() if p.requires_grad]
    g_opt = torch.optim.Adam(g_params, lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    d_opt = torch.optim.Adam(d_params, lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    return TrainState(cfg=cfg, generator=generator, discriminators=discriminators,
                      embedder=embedder, g_opt=g_opt, d_opt=d_opt)


def _cat_pyramids(parts: list[AttributePyramid]) -> AttributePyramid:
    return AttributePyramid(
        bottleneck=torch.cat([p.bottleneck for p in parts]),
        skips=[torch.cat(level) for level in zip(*(p.skips for p in parts))],
    )


@dataclass
class ForwardPass:
    """Synthesized images and traces for one pair batch, both directions."""

    swap_xy: torch.Tensor | None = None
    swap_yx: torch.Tensor | None = None
    trace_xy: list[torch.Tensor] | None = None
    trace_yx: list[torch.Tensor] | None = None
    recon_x: torch.Tensor | None = None
    recon_y: torch.Tensor | None = None
    trace_rx: list[torch.Tensor] | None = None
    trace_ry: list[torch.Tensor] | None = None
    pyramid_x: AttributePyramid | None = None
    pyramid_y: AttributePyramid | None = None


def _needed_streams(cfg: TrainConfig) -> tuple[bool, bool]:
    """(need_swap, need_recon) for the enabled losses.

    The adversary always judges swapped images, so the swap streams are
    computed whenever any of id/attr/adv is on; the reconstruction streams
    only when rec (or the trace-based attribute loss) consumes them.
    """
    need_swap = cfg.use_id or cfg.use_attr or cfg.use_adv
    need_recon = cfg.use_rec or (cfg.use_attr and cfg.attr_source == "decoder_trace")
    if not need_swap and not need_recon:
        raise ValueError("no enabled loss consumes generator output")
    return need_swap, need_recon


def dual_forward(generator: Generator, batch: PairBatch, need_recon: bool = True,
                 need_swap: bool = True) -> ForwardPass:
    """Both swap directions (and reconstructions) in one batched decode.

    Stream order along the batch axis: swap x->y, swap y->x, recon x, recon y
    (present streams only).
    """
    b = batch.batch_size
    both = torch.cat([batch.x_img, batch.y_img])
    pyr_xy = generator.encode_attributes(both)
    pyramid_x = AttributePyramid(pyr_xy.bottleneck[:b], [s[:b] for s in pyr_xy.skips])
    pyramid_y = AttributePyramid(pyr_xy.bottleneck[b:], [s[b:] for s in pyr_xy.skips])
    ids = generator.encode_identity(both)
    id_x, id_y = ids[:b], ids[b:]

    pyramids, id_codes, masks, lmks = [], [], [], []
    if need_swap:
        pyramids += [pyramid_y, pyramid_x]
        id_codes += [id_x, id_y]
        masks += [batch.y_mask, batch.x_mask]
        lmks += [batch.y_lmk, batch.x_lmk]
    if need_recon:
        pyramids += [pyramid_x, pyramid_y]
        id_codes += [id_x, id_y]
        masks += [batch.x_mask, batch.y_mask]
        lmks += [batch.x_lmk, batch.y_lmk]

    imgs, trace = generator.decode(_cat_pyramids(pyramids), torch.cat(id_codes),
                                   torch.cat(masks), torch.cat(lmks))
    out = ForwardPass(pyramid_x=pyramid_x, pyramid_y=pyramid_y)
    at = 0
    if need_swap:
        out.swap_xy, out.swap_yx = imgs[:b], imgs[b: 2 * b]
        out.trace_xy = [t[:b] for t in trace]
        out.trace_yx = [t[b: 2 * b] for t in trace]
        at = 2 * b
    if need_recon:
        out.recon_x, out.recon_y = imgs[at: at + b], imgs[at + b:]
        out.trace_rx = [t[at: at + b] for t in trace]
        out.trace_ry = [t[at + b:] for t in trace]
    return out


def compute_g_losses(state: TrainState, batch: PairBatch, fwd: ForwardPass,
                     l_adv_d: torch.Tensor | None = None) -> LossBundle:
    """Generator objective from a forward pass; honors the loss toggles."""
    cfg = state.cfg
    zero = torch.zeros(())

    if cfg.use_id:
        id_xy = identity_loss(batch.x_img, fwd.swap_xy, state.embedder)
        id_yx = identity_loss(batch.y_img, fwd.swap_yx, state.embedder)
    else:
        id_xy = id_yx = zero

    if cfg.use_attr:
        if cfg.attr_source == "decoder_trace":
            attr_xy = attribute_loss(fwd.trace_xy, fwd.trace_ry, batch.y_mask)
            attr_yx = attribute_loss(fwd.trace_yx, fwd.trace_rx, batch.x_mask)
        else:
            enc = state.generator.encode_attributes
            swap_feats = enc(torch.cat([fwd.swap_xy, fwd.swap_yx]))
            b = batch.batch_size
            attr_xy = attribute_loss([s[:b] for s in swap_feats.skips],
                                     fwd.pyramid_y.skips, batch.y_mask)
            attr_yx = attribute_loss([s[b:] for s in swap_feats.skips],
                                     fwd.pyramid_x.skips, batch.x_mask)
    else:
        attr_xy = attr_yx = zero

    if cfg.use_rec:
        rec_x = reconstruction_loss(fwd.recon_x, batch.x_img)
        rec_y = reconstruction_loss(fwd.recon_y, batch.y_img)
    else:
        rec_x = rec_y = zero

    if cfg.use_adv:
        d_xy, d_yx = _direction_discriminators(state)
        (_, fake_xy), (_, fake_yx) = _adv_pairs(cfg, batch, fwd)
        adv_xy = g_adv_loss(d_xy, fake_xy, saturating=cfg.saturating)
        adv_yx = g_adv_loss(d_yx, fake_yx, saturating=cfg.saturating)
    else:
        adv_xy = adv_yx = zero

    return total_loss(id_xy, id_yx, attr_xy, attr_yx, rec_x, rec_y, adv_xy, adv_yx,
                      lambda_id=cfg.lambda_id, lambda_attr=cfg.lambda_attr,
                      lambda_rec=cfg.lambda_rec, l_adv_d=l_adv_d)


def _direction_discriminators(state: TrainState):
    if len(state.discriminators) == 1:
        return state.discriminators[0], state.discriminators[0]
    return state.discriminators[0], state.discriminators[1]


def _cond_landmarks(cfg: TrainConfig, batch: PairBatch):
    """Landmark images for discriminator conditioning, per direction (xy, yx).

    The no_landmarks ablation conditions on zero landmark images everywhere.
    """
    if cfg.ablation == "no_landmarks":
        return torch.zeros_like(batch.y_lmk), torch.zeros_like(batch.x_lmk)
    return batch.y_lmk, batch.x_lmk


def _adv_pairs(cfg: TrainConfig, batch: PairBatch, fwd: ForwardPass):
    """Real/fake (image, landmark) pairs per direction for the adversary.

    Fakes are the swapped images conditioned on the target's landmarks;
    reals are the targets with their own landmarks.
    """
    lmk_y, lmk_x = _cond_landmarks(cfg, batch)
    return (((batch.y_img, lmk_y), (fwd.swap_xy, lmk_y)),
            ((batch.x_img, lmk_x), (fwd.swap_yx, lmk_x)))


def evaluate_losses(state: TrainState, batch: PairBatch) -> LossBundle:
    """Forward both directions and assemble the objective without any update.

    Exchanging the roles of x and y in the batch permutes the directional
    sub-terms but leaves every headline loss unchanged.
    """
    cfg = state.cfg
    need_swap, need_recon = _needed_streams(cfg)
    fwd = dual_forward(state.generator, batch, need_recon=need_recon,
                       need_swap=need_swap)
    l_adv_d = None
    if cfg.use_adv:
        d_xy, d_yx = _direction_discriminators(state)
        (real_xy, fake_xy), (real_yx, fake_yx) = _adv_pairs(cfg, batch, fwd)
        l_adv_d = (d_loss(d_xy, real_xy, fake_xy)
                   + d_loss(d_yx, real_yx, fake_yx)).detach()
    return compute_g_losses(state, batch, fwd, l_adv_d=l_adv_d)


def train_step(state: TrainState, batch: PairBatch) -> LossBundle:
    """One discriminator update then one generator update on a pair batch."""
    cfg = state.cfg
    need_swap, need_recon = _needed_streams(cfg)
    fwd = dual_forward(state.generator, batch, need_recon=need_recon,
                       need_swap=need_swap)

    l_adv_d = None
    if cfg.use_adv:
        d_xy, d_yx = _direction_discriminators(state)
        (real_xy, fake_xy), (real_yx, fake_yx) = _adv_pairs(cfg, batch, fwd)
        l_adv_d = d_loss(d_xy, real_xy, fake_xy) + d_loss(d_yx, real_yx, fake_yx)
        if not _is_finite(float(l_adv_d.detach())):
            raise NonFiniteLossError(state.iteration + 1, {"l_adv_d": float(l_adv_d.detach())})
        state.d_opt.zero_grad(set_to_none=True)
        l_adv_d.backward()
        state.d_opt.step()

    bundle = compute_g_losses(state, batch, fwd, l_adv_d=l_adv_d.detach() if l_adv_d is not None else None)
    terms = bundle.terms()
    if not all(_is_finite(v) for k, v in terms.items() if k != "l_adv_d"):
        raise NonFiniteLossError(state.iteration + 1, terms)
    state.g_opt.zero_grad(set_to_none=True)
    bundle.l_total.backward()
    state.g_opt.step()

    state.iteration += 1
    row = {"iter": state.iteration, **terms}
    state.loss_tail.append(row)
    if len(state.loss_tail) > LOSS_TAIL_LEN:
        del state.loss_tail[: len(state.loss_tail) - LOSS_TAIL_LEN]
    return bundle


def save_checkpoint(state: TrainState, path) -> None:
    payload = {
        "iteration": state.iteration,
        "config_ini": config_to_ini(state.cfg),
        "config_fingerprint": config_fingerprint(state.cfg),
        "generator": state.generator.state_dict(),
        "discriminators": state.discriminators.state_dict(),
        "embedder": state.embedder.state_dict(),
        "g_opt": state.g_opt.state_dict(),
        "d_opt": state.d_opt.state_dict(),
        "loss_tail": state.loss_tail,
    }
    torch.save(payload, path)


def load_checkpoint(path) -> TrainState:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    cfg = config_from_ini(payload["config_ini"])
    if payload["config_fingerprint"] != config_fingerprint(cfg):
        raise ValueError(f"checkpoint {path} config fingerprint mismatch")
    state = init_state(cfg)
    state.generator.load_state_dict(payload["generator"])
    state.discriminators.load_state_dict(payload["discriminators"])
    state.embedder.load_state_dict(payload["embedder"])
    state.g_opt.load_state_dict(payload["g_opt"])
    state.d_opt.load_state_dict(payload["d_opt"])
    state.iteration = payload["iteration"]
    state.loss_tail = list(payload["loss_tail"])
    return state


@dataclass
class TrainResult:
    state: TrainState
    checkpoints: dict[int, Path]
    loss_csv: Path


def _csv_row(row: dict) -> str:
    return ",".join(repr(row[k]) if k != "iter" else str(row[k]) for k in LOSS_CSV_FIELDS)


def train(cfg: TrainConfig, dataset: SampleDataset, out_dir, log_every: int = 250) -> TrainResult:
    """Run the full loop: initial checkpoint, iterations, snapshots, CSV log."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    state = init_state(cfg)
    snaps = set(cfg.active_snapshots())
    checkpoints: dict[int, Path] = {}

    def snap(it: int) -> None:
        p = out / f"ckpt_{it:07d}.pt"
        save_checkpoint(state, p)
        checkpoints[it] = p

    snap(0)
    csv_path = out / "loss_log.csv"
    t0 = time.time()
    with open(csv_path, "w") as csv:
        csv.write(",".join(LOSS_CSV_FIELDS) + "\n")
        for it in range(1, cfg.iters + 1):
            batch = make_pair_batch(dataset, cfg.batch, seed=[cfg.seed, it])
            bundle = train_step(state, batch)
            csv.write(_csv_row(state.loss_tail[-1]) + "\n")
            if it % log_every == 0 or it == cfg.iters:
                csv.flush()
                row = state.loss_tail[-1]
                log.info(
                    "iter %d/%d l_total %.4f l_rec %.4f l_id %.4f (%.1fs)",
                    it, cfg.iters, row["l_total"], row["l_rec"], row["l_id"],
                    time.time() - t0,
                )
            if it in snaps:
                snap(it)
    return TrainResult(state=state, checkpoints=checkpoints, loss_csv=csv_path)
