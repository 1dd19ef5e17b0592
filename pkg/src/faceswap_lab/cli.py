"""Command-line front end.

Subcommands: gen-data, train, swap, swap-progressive, evaluate, ablate.
Every command honors --seed and --config; flags mirror config keys one to one
and override the config file. All outputs land under --out. Exit codes:
0 success, 2 usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

from .config import TrainConfig, load_config, save_config

log = logging.getLogger(__name__)

_TUPLE_FIELDS = ("channels", "snapshot_iters")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    for f in fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        default_val = getattr(TrainConfig(), f.name)
        if f.name in _TUPLE_FIELDS:
            parser.add_argument(flag, type=str, default=None, metavar="N,N,...",
                                help=f"config {f.name} (default {default_val})")
        elif isinstance(default_val, bool):
            parser.add_argument(flag, type=str, default=None, metavar="BOOL",
                                help=f"config {f.name} (default {default_val})")
        elif f.name == "seed":
            continue  # --seed is added once, shared by every command
        else:
            parser.add_argument(flag, type=type(default_val), default=None,
                                help=f"config {f.name} (default {default_val})")


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"cannot parse boolean flag value {text!r}")


def build_config(args: argparse.Namespace) -> TrainConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else TrainConfig()
    updates = {}
    for f in fields(TrainConfig):
        val = getattr(args, f.name, None)
        if val is None:
            continue
        if f.name in _TUPLE_FIELDS:
            updates[f.name] = tuple(int(x) for x in str(val).split(","))
        elif isinstance(getattr(TrainConfig(), f.name), bool):
            updates[f.name] = _parse_bool(val)
        else:
            updates[f.name] = val
    return replace(cfg, **updates)


def _load_dataset(args, cfg: TrainConfig):
    from .data import export_dataset, load_sample_dir, make_corpus

    if getattr(args, "data", None):
        return load_sample_dir(args.data)
    cache_root = Path(os.environ.get("FACESWAP_LAB_CACHE",
                                     Path.home() / ".cache" / "faceswap_lab"))
    key = f"sprites_{cfg.n_ids}x{cfg.per_id}_r{cfg.resolution}_s{cfg.seed}"
    cache_dir = cache_root / key
    if not cache_dir.is_dir():
        log.info("generating dataset cache at %s", cache_dir)
        ds = make_corpus(cfg.n_ids, cfg.per_id, cfg.resolution, seed=cfg.seed)
        export_dataset(ds, cache_dir)
        return ds
    return load_sample_dir(cache_dir)


def cmd_gen_data(args) -> int:
    from .data import export_dataset, make_corpus

    cfg = build_config(args)
    ds = make_corpus(cfg.n_ids, cfg.per_id, cfg.resolution, seed=cfg.seed)
    stems = export_dataset(ds, args.out)
    print(f"wrote {len(stems)} samples to {args.out}")
    return 0


def _run_training(args, cfg: TrainConfig) -> int:
    from .trainer import train

    dataset = _load_dataset(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.ini")
    result = train(cfg, dataset, out)
    print(f"trained {cfg.iters} iterations; "
          f"checkpoints: {', '.join(p.name for p in result.checkpoints.values())}; "
          f"loss log: {result.loss_csv.name}")
    return 0


def cmd_train(args) -> int:
    return _run_training(args, build_config(args))


def cmd_ablate(args) -> int:
    cfg = replace(build_config(args), ablation=args.variant)
    return _run_training(args, cfg)


def _sample_by_ref(dataset, ref: str):
    if ref.isdigit() or (ref.startswith("-") and ref[1:].isdigit()):
        idx = int(ref)
        if not 0 <= idx < len(dataset):
            raise ValueError(f"sample index {idx} out of range [0, {len(dataset)})")
        return dataset[idx]
    raise ValueError(f"sample reference {ref!r} must be an integer index")


def cmd_swap(args) -> int:
    from .data import load_sample_dir, save_image_png
    from .swapping import swap

    dataset = load_sample_dir(args.data)
    src = _sample_by_ref(dataset, args.src)
    tgt = _sample_by_ref(dataset, args.tgt)
    result = swap(args.ckpt, src, tgt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_image_png(out / "swap.png", result.image)
    sidecar = {
        "similarity_to_src": result.similarity_to_src,
        "similarity_to_tgt": result.similarity_to_tgt,
        "src_label": src.identity_label,
        "tgt_label": tgt.identity_label,
    }
    (out / "swap.json").write_text(json.dumps(sidecar, indent=2))
    print(f"swap written to {out / 'swap.png'}; "
          f"cos(src)={result.similarity_to_src:.4f} cos(tgt)={result.similarity_to_tgt:.4f}")
    return 0


def _collect_checkpoints(args) -> list[Path]:
    if args.ckpt:
        return [Path(p) for p in args.ckpt]
    if not args.ckpt_dir:
        raise ValueError("need --ckpt (repeatable) or --ckpt-dir")
    ckpt_dir = Path(args.ckpt_dir)
    paths = sorted(ckpt_dir.glob("ckpt_*.pt"))
    if not paths:
        raise ValueError(f"no checkpoints found in {ckpt_dir}")
    return paths


def cmd_swap_progressive(args) -> int:
    from .data import load_sample_dir
    from .swapping import swap_progressive

    dataset = load_sample_dir(args.data)
    src = _sample_by_ref(dataset, args.src)
    tgt = _sample_by_ref(dataset, args.tgt)
    paths = _collect_checkpoints(args)
    _, rows = swap_progressive(paths, src, tgt, out_dir=args.out)
    print(f"progressive strip over {len(rows)} checkpoints written to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    from .data import load_sample_dir, sample_eval_pairs
    from .metrics import evaluate

    cfg = build_config(args)
    dataset = load_sample_dir(args.data)
    pairs = sample_eval_pairs(dataset, args.n_pairs, seed=cfg.seed)
    report = evaluate(args.ckpt, pairs, out_dir=args.out)
    print(report.to_text(), end="")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faceswap-lab",
        description="One-shot progressive face swapping on sprite faces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, with_config_flags: bool = True) -> None:
        p.add_argument("--config", type=str, default=None, help="INI config file")
        p.add_argument("--seed", type=int, default=None, help="config seed override")
        if with_config_flags:
            _add_config_flags(p)

    p = sub.add_parser("gen-data", help="render a sprite corpus to a directory")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train on a sprite corpus")
    common(p)
    p.add_argument("--data", type=str, default=None, help="dataset directory (default: cache)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("ablate", help="train one architecture ablation")
    common(p)
    p.add_argument("--variant", required=True,
                   choices=("frozen_id", "unmasked", "no_landmarks"))
    p.add_argument("--data", type=str, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("swap", help="swap one pair under one checkpoint")
    common(p, with_config_flags=False)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--src", required=True, help="source sample index")
    p.add_argument("--tgt", required=True, help="target sample index")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_swap)

    p = sub.add_parser("swap-progressive", help="swap one pair across checkpoints")
    common(p, with_config_flags=False)
    p.add_argument("--ckpt", action="append", default=None, help="checkpoint (repeatable)")
    p.add_argument("--ckpt-dir", type=str, default=None, help="directory of ckpt_*.pt")
    p.add_argument("--data", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_swap_progressive)

    p = sub.add_parser("evaluate", help="score swaps on sampled pairs")
    common(p, with_config_flags=False)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--n-pairs", type=int, default=32)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
