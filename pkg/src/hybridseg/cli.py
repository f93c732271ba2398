"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerics error, 4 check failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericsError, ShapeError
from .model.config import ModelConfig, preset
from .model.encoder import Encoder
from .model.net import SegmentationNet
from .tensorio import heatmap_to_pgm, load_checkpoint, save_checkpoint

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICS, EXIT_CHECK = 0, 2, 3, 4


def parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"size must look like HxW, got {text!r}") from None
    if h < 1 or w < 1:
        raise ConfigError(f"size must be positive, got {text!r}")
    return h, w


def parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"sizes must be comma-separated integers, got {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise ConfigError("need at least one positive size")
    return sizes


def split_run_config(data: dict):
    """Split a run config into (ModelConfig, TrainSettings).

    Keys are ModelConfig fields, training fields, or ``preset`` naming the base
    architecture that the remaining model fields override.
    """
    from .harness.train import TrainSettings

    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    base = data.pop("preset", None)
    model_keys = {f.name for f in dataclasses.fields(ModelConfig)}
    train_keys = {f.name for f in dataclasses.fields(TrainSettings)}
    unknown = set(data) - model_keys - train_keys
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    model_part = {k: v for k, v in data.items() if k in model_keys}
    train_part = {k: v for k, v in data.items() if k in train_keys}
    try:
        cfg = preset(base, **model_part) if base else ModelConfig.from_dict(model_part)
        settings = TrainSettings.from_dict(train_part)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg, settings


def load_run_config(path):
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    return split_run_config(data)


def model_from_checkpoint(directory, dtype=None) -> SegmentationNet:
    try:
        state, meta = load_checkpoint(directory)
    except FileNotFoundError:
        raise ConfigError(f"{directory} has no manifest.json") from None
    if "config" not in meta:
        raise ConfigError(f"checkpoint {directory} does not record its model config")
    cfg = ModelConfig.from_dict(meta["config"])
    net = SegmentationNet(cfg, dtype=dtype or np.dtype(meta.get("dtype", "float32")))
    net.load_state_dict(state)
    if dtype is not None:
        net.astype(dtype)
    return net


# -- commands -----------------------------------------------------------------
def cmd_check(args) -> int:
    from .harness.checks import run_suite

    results = run_suite(args.suite)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} passed")
    return EXIT_CHECK if failed else EXIT_OK


def cmd_gen(args) -> int:
    from .harness.data import gen_dataset, save_dataset

    h, w = parse_size(args.size)
    samples = gen_dataset(args.seed, args.count, h, w, args.classes)
    save_dataset(samples, args.out, args.classes)
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .harness.data import load_dataset
    from .harness.train import train

    cfg, settings = load_run_config(args.config)
    samples, num_classes = load_dataset(args.data)
    if num_classes != cfg.num_classes:
        raise ConfigError(f"dataset has {num_classes} classes but config expects {cfg.num_classes}")
    report, model = train(cfg, samples, args.steps, args.lr, args.seed, settings)
    out = Path(args.out)
    save_checkpoint(out, model.state_dict(), {"config": cfg.to_dict(), "dtype": settings.dtype, "seed": args.seed})
    (out / "report.json").write_text(report.to_json())
    print(json.dumps({
        "initial_loss": report.losses[0],
        "final_loss": report.losses[-1],
        "pixel_accuracy": report.pixel_accuracy,
        "mean_iou": report.mean_iou,
        "digest": report.digest(),
    }))
    return EXIT_OK


def cmd_eval(args) -> int:
    from .harness.data import load_dataset
    from .harness.train import evaluate

    net = model_from_checkpoint(args.ckpt)
    samples, num_classes = load_dataset(args.data)
    if num_classes != net.cfg.num_classes:
        raise ConfigError(f"dataset has {num_classes} classes but checkpoint expects {net.cfg.num_classes}")
    acc, miou, iou = evaluate(net, samples, num_classes)
    print(json.dumps({
        "samples": len(samples),
        "pixel_accuracy": acc,
        "mean_iou": miou,
        "class_iou": [None if np.isnan(v) else float(v) for v in iou],
    }))
    return EXIT_OK


def cmd_erf(args) -> int:
    from .harness.erf import erf_map

    h, w = parse_size(args.size)
    if h % 32 or w % 32:
        raise ConfigError(f"ERF size {h}x{w} must be a multiple of 32")
    if not 1 <= args.stage <= 4:
        raise ConfigError("stage must be 1..4")
    if args.ckpt:
        net = model_from_checkpoint(args.ckpt, np.float64)
        encoder = net.encoder
    else:
        cfg, _ = load_run_config(args.config)
        encoder = Encoder(cfg, np.random.default_rng(args.seed)).astype(np.float64)
    encoder.eval()
    heat = erf_map(lambda x: encoder(x)[args.stage - 1], h, w, args.samples, args.seed)
    heatmap_to_pgm(args.out, heat)
    print(json.dumps({"out": str(args.out), "min": float(heat.min()), "nonzero": int((heat > 0).sum())}))
    return EXIT_OK


def cmd_bench(args) -> int:
    from .harness.bench import BLOCKS, bench_scaling, doubling_ratios, write_csv

    if args.block not in BLOCKS:
        raise ConfigError(f"block must be one of {BLOCKS}")
    sizes = parse_sizes(args.sizes)
    rows = bench_scaling(args.block, args.channels, sizes, args.reps, args.window)
    write_csv(args.out, rows)
    for side, tokens, t in rows:
        print(f"{side:5d} {tokens:8d} {t:.6f}s")
    if len(rows) > 1:
        print("doubling ratios:", ", ".join(f"{r:.2f}" for r in doubling_ratios(rows)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridseg", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="run a verification suite")
    c.add_argument("--suite", required=True, choices=["oracles", "grads", "shapes", "io", "all"])
    c.set_defaults(fn=cmd_check)

    g = sub.add_parser("gen", help="write a synthetic segmentation dataset")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--size", required=True, help="HxW")
    g.add_argument("--classes", type=int, default=2)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen)

    t = sub.add_parser("train", help="train on a generated dataset and write a checkpoint")
    t.add_argument("--config", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--steps", type=int, default=300)
    t.add_argument("--lr", type=float, default=3e-3)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint on a dataset")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.set_defaults(fn=cmd_eval)

    r = sub.add_parser("erf", help="effective receptive field heat map of an encoder stage")
    r.add_argument("--config")
    r.add_argument("--ckpt")
    r.add_argument("--size", default="128x128")
    r.add_argument("--samples", type=int, default=4)
    r.add_argument("--stage", type=int, default=1, help="encoder stage 1..4 (default 1)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.set_defaults(fn=cmd_erf)

    b = sub.add_parser("bench", help="time a token mixer over growing square maps")
    b.add_argument("--block", required=True)
    b.add_argument("--channels", type=int, default=32)
    b.add_argument("--sizes", default="32,64,128,256")
    b.add_argument("--reps", type=int, default=3)
    b.add_argument("--window", type=int, default=7)
    b.add_argument("--out", required=True)
    b.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "erf" and not (args.config or args.ckpt):
        print("error: erf needs --config or --ckpt", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.fn(args)
    except (ConfigError, ShapeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericsError as exc:
        print(f"numerics error: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
