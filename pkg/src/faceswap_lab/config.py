"""Run configuration: dataclass, INI file round-trip, presets, fingerprint."""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, fields, replace

ABLATIONS = ("none", "frozen_id", "unmasked", "no_landmarks")
EMBEDDERS = ("random_frozen", "external", "sprite_oracle")
ATTR_SOURCES = ("decoder_trace", "encoder")

# Section layout of the INI file; every TrainConfig field appears exactly once.
_SECTIONS = {
    "optim": ("lr", "beta1", "beta2", "batch"),
    "loss": ("lambda_id", "lambda_attr", "lambda_rec",
             "use_rec", "use_id", "use_attr", "use_adv", "saturating"),
    "model": ("resolution", "d_id", "d_emb", "channels", "lmk_hidden", "fuse_mode",
              "embedder", "embedder_path", "attr_source", "separate_discriminators"),
    "train": ("iters", "snapshot_iters", "seed", "ablation"),
    "data": ("n_ids", "per_id"),
}


@dataclass(frozen=True)
class TrainConfig:
    """Everything that determines a training run, and nothing else."""

    # optimizer
    lr: float = 1e-4
    beta1: float = 0.0
    beta2: float = 0.99
    batch: int = 8
    # loss weights and toggles
    lambda_id: float = 10.0
    lambda_attr: float = 1.0
    lambda_rec: float = 1.0
    use_rec: bool = True
    use_id: bool = True
    use_attr: bool = True
    use_adv: bool = True
    saturating: bool = False
    # model
    resolution: int = 64
    d_id: int = 64
    d_emb: int = 64
    channels: tuple[int, ...] = (6, 12, 24, 48, 48)
    lmk_hidden: int = 8
    fuse_mode: str = "verbatim"
    embedder: str = "random_frozen"
    embedder_path: str = ""
    attr_source: str = "decoder_trace"
    separate_discriminators: bool = False
    # schedule
    iters: int = 5000
    snapshot_iters: tuple[int, ...] = (100, 300, 1000, 3000, 5000)
    seed: int = 0
    ablation: str = "none"
    # corpus defaults used when no dataset directory is given
    n_ids: int = 200
    per_id: int = 4

    def __post_init__(self) -> None:
        if self.resolution % 64:
            raise ValueError(f"resolution {self.resolution} must be divisible by 64")
        if len(self.channels) != 5 or any(c < 1 for c in self.channels):
            raise ValueError(f"channels must be five positive widths, got {self.channels}")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablation!r}; expected one of {ABLATIONS}")
        if self.embedder not in EMBEDDERS:
            raise ValueError(f"unknown embedder {self.embedder!r}; expected one of {EMBEDDERS}")
        if self.attr_source not in ATTR_SOURCES:
            raise ValueError(f"unknown attr_source {self.attr_source!r}")
        if self.embedder == "sprite_oracle":
            raise ValueError("the sprite-oracle embedder is evaluation-only; "
                             "training needs a differentiable embedder")
        if self.iters < 0 or self.batch < 1:
            raise ValueError("iters must be >= 0 and batch >= 1")
        bad = [i for i in self.snapshot_iters if not 1 <= i]
        if bad:
            raise ValueError(f"snapshot iterations must be >= 1, got {bad}")

    def active_snapshots(self) -> tuple[int, ...]:
        return tuple(sorted(i for i in set(self.snapshot_iters) if i <= self.iters))


def full_preset() -> TrainConfig:
    """Full-scale configuration matching the documented architecture."""
    return TrainConfig(
        resolution=256, d_id=256, d_emb=512,
        channels=(32, 64, 128, 256, 256), lmk_hidden=64,
        embedder="external", iters=200_000,
        snapshot_iters=(1000, 10_000, 50_000, 100_000, 200_000),
        n_ids=0, per_id=0,
    )


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    return str(v)


def _parse_value(text: str, field_type, name: str):
    text = text.strip()
    if field_type is bool:
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"cannot parse boolean {name} = {text!r}")
    if field_type is int:
        return int(text)
    if field_type is float:
        return float(text)
    if field_type is str:
        return text
    # remaining fields are int tuples
    if not text:
        return ()
    return tuple(int(x) for x in text.split(","))


def _field_types() -> dict[str, type]:
    out = {}
    for f in fields(TrainConfig):
        if f.name in ("channels", "snapshot_iters"):
            out[f.name] = tuple
        else:
            out[f.name] = type(getattr(TrainConfig(), f.name))
    return out


def config_to_ini(cfg: TrainConfig) -> str:
    parser = configparser.ConfigParser()
    for section, names in _SECTIONS.items():
        parser[section] = {n: _format_value(getattr(cfg, n)) for n in names}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def config_from_ini(text: str) -> TrainConfig:
    parser = configparser.ConfigParser()
    parser.read_string(text)
    types = _field_types()
    known = {n for names in _SECTIONS.values() for n in names}
    updates = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        for name, value in parser[section].items():
            if name not in known:
                raise ValueError(f"unknown config key {name!r} in [{section}]")
            updates[name] = _parse_value(value, types[name], name)
    return replace(TrainConfig(), **updates)


def save_config(cfg: TrainConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write(config_to_ini(cfg))


def load_config(path) -> TrainConfig:
    with open(path) as fh:
        return config_from_ini(fh.read())


def config_fingerprint(cfg: TrainConfig) -> str:
    """Stable short digest of the canonical INI text."""
    return hashlib.sha256(config_to_ini(cfg).encode()).hexdigest()[:16]
