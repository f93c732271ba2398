"""Wall-clock scaling of the token mixers with sequence length."""

from __future__ import annotations

import csv
import math
import time

import numpy as np

from ..attention import GlobalAttention, NeighborhoodAttention
from ..errors import ConfigError
from ..model.config import ModelConfig
from ..model.encoder import LassBlock
from ..ssm import SS2D
from ..tensor import Tensor, no_grad

BLOCKS = ("lass", "natten", "ss2d", "global_attention")


def build_block(kind: str, channels: int, window: int = 7, seed: int = 0, dtype=np.float32):
    rng = np.random.default_rng(seed)
    if kind == "lass":
        cfg = ModelConfig(stage_channels=[channels] * 4, window_sizes=[window] * 4)
        block = LassBlock(channels, window, 0, cfg, rng)
    elif kind == "natten":
        block = NeighborhoodAttention(channels, window, rng=rng)
    elif kind == "ss2d":
        block = SS2D(channels, rng=rng)
    elif kind == "global_attention":
        block = GlobalAttention(channels, rng=rng)
    else:
        raise ConfigError(f"unknown block {kind!r}; choose from {BLOCKS}")
    return block.astype(dtype)


def bench_scaling(kind, channels, sizes, reps=3, window=7, seed=0, dtype=np.float32):
    """Median forward time per square map side; returns rows of (side, L, seconds)."""
    block = build_block(kind, channels, window, seed, dtype)
    rng = np.random.default_rng(seed)
    rows = []
    with no_grad():
        for side in sizes:
            x = Tensor(rng.normal(size=(1, channels, side, side)).astype(dtype))
            block(x)  # warmup
            times = []
            for _ in range(reps):
                t0 = time.perf_counter()
                block(x)
                times.append(time.perf_counter() - t0)
            rows.append((side, side * side, float(np.median(times))))
    return rows


def doubling_ratios(rows) -> list[float]:
    """Runtime growth per doubling of L between consecutive rows.

    For rows L1 < L2 this is (t2 / t1) ** (1 / log2(L2 / L1)), so linear cost
    gives 2 and quadratic cost 4 regardless of the spacing of sizes.
    """
    out = []
    for (_, l1, t1), (_, l2, t2) in zip(rows, rows[1:]):
        out.append((t2 / t1) ** (1.0 / math.log2(l2 / l1)))
    return out


def write_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["side", "tokens", "seconds"])
        for side, L, t in rows:
            wr.writerow([side, L, repr(t)])


def read_csv(path):
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        next(rd)
        return [(int(s), int(L), float(t)) for s, L, t in rd]
