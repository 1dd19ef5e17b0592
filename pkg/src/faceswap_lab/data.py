"""Sample containers, corpus generation, pairing, file I/O and mask resizing.

A Sample bundles one face image with its swap-area mask, landmark set, integer
identity label and, for synthetic data, the generating SpriteParams. Datasets
are in-memory lists of samples at a common resolution. On disk a sample is a
PNG plus sidecars: `<stem>.mask.png`, `<stem>.lmk.json`, `<stem>.id.txt` and,
when analytic parameters are known, `<stem>.sprite.json`.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .landmarks import LandmarkSet, rasterize_landmarks
from .sprites import SpriteParams, render_sprite, sample_params

log = logging.getLogger(__name__)

_PAIR_STREAM = 0x9A12


def image_to_tensor(img01: np.ndarray) -> torch.Tensor:
    """(H, W, 3) float image in [0, 1] to a (1, 3, H, W) tensor in [-1, 1]."""
    t = torch.from_numpy(np.ascontiguousarray(img01, dtype=np.float32))
    return (t.permute(2, 0, 1) * 2.0 - 1.0).unsqueeze(0)


def tensor_to_image(t: torch.Tensor) -> np.ndarray:
    """(1, 3, H, W) or (3, H, W) tensor in [-1, 1] to (H, W, 3) float in [0, 1]."""
    if t.dim() == 4:
        if t.shape[0] != 1:
            raise ValueError(f"expected a single image, got batch of {t.shape[0]}")
        t = t[0]
    arr = t.detach().to(torch.float32).clamp(-1.0, 1.0).permute(1, 2, 0).numpy()
    return (arr + 1.0) / 2.0


def save_image_png(path, t: torch.Tensor) -> None:
    arr = tensor_to_image(t)
    u8 = np.rint(arr * 255.0).astype(np.uint8)
    Image.fromarray(u8, mode="RGB").save(path)


def load_image_png(path) -> torch.Tensor:
    u8 = np.asarray(Image.open(path).convert("RGB"))
    return image_to_tensor(u8.astype(np.float32) / 255.0)


@dataclass
class Sample:
    """One face with its mask, landmarks and identity label."""

    image: torch.Tensor
    mask: torch.Tensor
    landmarks: LandmarkSet
    identity_label: int
    sprite: SpriteParams | None = None
    _lmk_image: torch.Tensor | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.image.dim() != 4 or self.image.shape[:2] != (1, 3):
            raise ValueError(f"image must be (1, 3, H, W), got {tuple(self.image.shape)}")
        if self.mask.dim() != 4 or self.mask.shape[:2] != (1, 1):
            raise ValueError(f"mask must be (1, 1, H, W), got {tuple(self.mask.shape)}")
        if self.mask.shape[2:] != self.image.shape[2:]:
            raise ValueError("mask and image spatial sizes differ")
        vals = torch.unique(self.mask)
        if not bool(((vals == 0) | (vals == 1)).all()):
            raise ValueError("mask must be binary {0, 1}")

    @property
    def resolution(self) -> tuple[int, int]:
        return int(self.image.shape[2]), int(self.image.shape[3])

    def lmk_image(self) -> torch.Tensor:
        """Rasterized landmark guidance image, cached after first use."""
        if self._lmk_image is None:
            h, w = self.resolution
            self._lmk_image = rasterize_landmarks(self.landmarks, h, w)
        return self._lmk_image


def make_sample(params: SpriteParams, height: int, width: int) -> Sample:
    img, mask, lmk = render_sprite(params, height, width)
    return Sample(
        image=image_to_tensor(img),
        mask=torch.from_numpy(mask).to(torch.float32).unsqueeze(0).unsqueeze(0),
        landmarks=lmk,
        identity_label=params.identity_seed,
        sprite=params,
    )


class SampleDataset:
    """In-memory list of samples at a common resolution."""

    def __init__(self, samples: list[Sample]):
        if not samples:
            raise ValueError("dataset needs at least one sample")
        res = samples[0].resolution
        for s in samples:
            if s.resolution != res:
                raise ValueError(f"mixed resolutions in dataset: {s.resolution} vs {res}")
        self.samples = list(samples)
        self.resolution = res

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, i: int) -> Sample:
        return self.samples[i]

    @property
    def labels(self) -> list[int]:
        return [s.identity_label for s in self.samples]

    def identities(self) -> list[int]:
        out: list[int] = []
        for s in self.samples:
            if s.identity_label not in out:
                out.append(s.identity_label)
        return out


def make_corpus(
    n_ids: int,
    per_id: int,
    resolution: int = 64,
    seed: int = 0,
) -> SampleDataset:
    """Render a corpus of n_ids identities with per_id views each.

    Identity seeds are drawn from a deterministic map of (seed, index);
    identities are resampled on exact skin-color collision so every identity
    in one corpus has a unique skin color.
    """
    if n_ids < 1 or per_id < 1:
        raise ValueError("n_ids and per_id must be positive")
    samples: list[Sample] = []
    used_skins: set[tuple[float, float, float]] = set()
    for i in range(n_ids):
        identity_seed = seed * 1_000_000 + i
        for bump in range(1000):
            candidate = identity_seed + bump * 100_000_000
            params0 = sample_params(candidate, view_seed=0)
            if params0.skin_color not in used_skins:
                identity_seed = candidate
                break
        else:
            raise RuntimeError("could not find an unused skin color")
        used_skins.add(sample_params(identity_seed, view_seed=0).skin_color)
        for v in range(per_id):
            params = sample_params(identity_seed, view_seed=v)
            samples.append(make_sample(params, resolution, resolution))
    return SampleDataset(samples)


@dataclass
class PairBatch:
    """A batch of cross-identity (x, y) sample pairs as stacked tensors."""

    x_img: torch.Tensor
    x_mask: torch.Tensor
    x_lmk: torch.Tensor
    y_img: torch.Tensor
    y_mask: torch.Tensor
    y_lmk: torch.Tensor
    x_labels: list[int]
    y_labels: list[int]

    def __post_init__(self) -> None:
        b = self.x_img.shape[0]
        for name in ("x_img", "x_mask", "x_lmk", "y_img", "y_mask", "y_lmk"):
            t = getattr(self, name)
            if t.shape[0] != b or t.shape[2:] != self.x_img.shape[2:]:
                raise ValueError(f"{name} shape {tuple(t.shape)} inconsistent with batch")
        if len(self.x_labels) != b or len(self.y_labels) != b:
            raise ValueError("label lists must match the batch size")
        for lx, ly in zip(self.x_labels, self.y_labels):
            if lx == ly:
                raise ValueError("pairs must cross identities")

    @property
    def batch_size(self) -> int:
        return int(self.x_img.shape[0])

    def swapped(self) -> "PairBatch":
        """The same batch with x and y roles exchanged."""
        return PairBatch(
            x_img=self.y_img, x_mask=self.y_mask, x_lmk=self.y_lmk,
            y_img=self.x_img, y_mask=self.x_mask, y_lmk=self.x_lmk,
            x_labels=self.y_labels, y_labels=self.x_labels,
        )


def make_pair_batch(dataset: SampleDataset, batch: int, seed) -> PairBatch:
    """Draw cross-identity pairs. Deterministic for a given seed."""
    if len(dataset.identities()) < 2:
        raise ValueError("pairing needs at least two identities")
    if batch < 1:
        raise ValueError("batch must be positive")
    rng = np.random.default_rng([_PAIR_STREAM, *np.atleast_1d(seed).tolist()])
    xs: list[Sample] = []
    ys: list[Sample] = []
    for _ in range(batch):
        i = int(rng.integers(len(dataset)))
        j = int(rng.integers(len(dataset)))
        while dataset[j].identity_label == dataset[i].identity_label:
            j = int(rng.integers(len(dataset)))
        xs.append(dataset[i])
        ys.append(dataset[j])
    return PairBatch(
        x_img=torch.cat([s.image for s in xs]),
        x_mask=torch.cat([s.mask for s in xs]),
        x_lmk=torch.cat([s.lmk_image() for s in xs]),
        y_img=torch.cat([s.image for s in ys]),
        y_mask=torch.cat([s.mask for s in ys]),
        y_lmk=torch.cat([s.lmk_image() for s in ys]),
        x_labels=[s.identity_label for s in xs],
        y_labels=[s.identity_label for s in ys],
    )


def sample_eval_pairs(dataset: SampleDataset, n_pairs: int, seed) -> list[tuple[Sample, Sample]]:
    """Draw cross-identity (source, target) sample pairs for evaluation.

    Same index stream as make_pair_batch, but keeps the Sample objects so
    callers get masks, landmarks and sprite metadata.
    """
    if len(dataset.identities()) < 2:
        raise ValueError("pairing needs at least two identities")
    if n_pairs < 1:
        raise ValueError("need at least one pair")
    rng = np.random.default_rng([_PAIR_STREAM, *np.atleast_1d(seed).tolist()])
    pairs: list[tuple[Sample, Sample]] = []
    for _ in range(n_pairs):
        i = int(rng.integers(len(dataset)))
        j = int(rng.integers(len(dataset)))
        while dataset[j].identity_label == dataset[i].identity_label:
            j = int(rng.integers(len(dataset)))
        pairs.append((dataset[i], dataset[j]))
    return pairs


def resize_mask(mask: torch.Tensor, out_h: int, out_w: int, channels: int = 1) -> torch.Tensor:
    """Nearest-neighbor downsample a binary mask and replicate channels.

    Keeps the mask strictly binary; at native scale the values pass through
    unchanged.
    """
    if mask.dim() != 4 or mask.shape[1] != 1:
        raise ValueError(f"mask must be (B, 1, H, W), got {tuple(mask.shape)}")
    h, w = mask.shape[2:]
    if out_h > h or out_w > w:
        raise ValueError(f"mask upsampling not supported: {h}x{w} -> {out_h}x{out_w}")
    if (out_h, out_w) != (h, w):
        mask = F.interpolate(mask, size=(out_h, out_w), mode="nearest")
        mask = (mask > 0.5).to(mask.dtype)
    if channels > 1:
        mask = mask.expand(mask.shape[0], channels, out_h, out_w)
    return mask


def export_dataset(dataset: SampleDataset, out_dir) -> list[str]:
    """Write every sample as PNG + sidecars. Returns the stems written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stems = []
    for i, s in enumerate(dataset.samples):
        stem = f"sprite_{i:05d}"
        save_image_png(out / f"{stem}.png", s.image)
        mask_u8 = (s.mask[0, 0].numpy() * 255).astype(np.uint8)
        Image.fromarray(mask_u8, mode="L").save(out / f"{stem}.mask.png")
        (out / f"{stem}.lmk.json").write_text(json.dumps(s.landmarks.to_dict()))
        (out / f"{stem}.id.txt").write_text(str(s.identity_label))
        if s.sprite is not None:
            (out / f"{stem}.sprite.json").write_text(json.dumps(s.sprite.to_dict()))
        stems.append(stem)
    return stems


def load_sample_dir(path) -> SampleDataset:
    """Load every complete sample from a directory of PNG + sidecar files.

    Samples with a missing sidecar are skipped with a logged warning; a
    directory yielding zero valid samples is an error.
    """
    root = Path(path)
    if not root.is_dir():
        raise ValueError(f"{root} is not a directory")
    samples: list[Sample] = []
    for png in sorted(root.glob("*.png")):
        if png.name.endswith(".mask.png"):
            continue
        stem = png.name[: -len(".png")]
        mask_p = root / f"{stem}.mask.png"
        lmk_p = root / f"{stem}.lmk.json"
        id_p = root / f"{stem}.id.txt"
        missing = [p.name for p in (mask_p, lmk_p, id_p) if not p.exists()]
        if missing:
            log.warning("skipping %s: missing sidecar(s) %s", png.name, ", ".join(missing))
            continue
        image = load_image_png(png)
        mask_u8 = np.asarray(Image.open(mask_p).convert("L"))
        mask = torch.from_numpy((mask_u8 > 127).astype(np.float32)).unsqueeze(0).unsqueeze(0)
        lmk = LandmarkSet.from_dict(json.loads(lmk_p.read_text()))
        label = int(id_p.read_text().strip())
        sprite_p = root / f"{stem}.sprite.json"
        sprite = None
        if sprite_p.exists():
            sprite = SpriteParams.from_dict(json.loads(sprite_p.read_text()))
        samples.append(Sample(image=image, mask=mask, landmarks=lmk,
                              identity_label=label, sprite=sprite))
    if not samples:
        raise ValueError(f"no valid samples found in {root}")
    return SampleDataset(samples)
