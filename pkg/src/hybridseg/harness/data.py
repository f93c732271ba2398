"""Synthetic segmentation scenes: rectangles and discs on a noisy background."""

from __future__ import annotations

import colorsys
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..tensorio import read_pgm, read_ppm, write_pgm, write_ppm


@dataclass
class SyntheticSample:
    image: np.ndarray  # [3, H, W] float in [0, 1], quantised to 1/255 steps
    mask: np.ndarray   # [H, W] uint8 labels


def class_palette(num_classes: int) -> np.ndarray:
    """Background is dark grey; foreground classes get evenly spaced hues."""
    colors = [(0.2, 0.2, 0.2)]
    for c in range(1, num_classes):
        colors.append(colorsys.hsv_to_rgb((c - 1) / max(1, num_classes - 1), 0.8, 0.9))
    return np.array(colors)


def _draw_shape(rng, mask, label):
    h, w = mask.shape
    if rng.random() < 0.5:
        rh = rng.integers(max(2, h // 6), max(3, int(h / 2.5)) + 1)
        rw = rng.integers(max(2, w // 6), max(3, int(w / 2.5)) + 1)
        top = rng.integers(0, h - rh + 1)
        left = rng.integers(0, w - rw + 1)
        mask[top:top + rh, left:left + rw] = label
    else:
        r = rng.uniform(min(h, w) / 10, min(h, w) / 5)
        cy, cx = rng.uniform(r, h - r), rng.uniform(r, w - r)
        yy, xx = np.mgrid[:h, :w]
        mask[(yy + 0.5 - cy) ** 2 + (xx + 0.5 - cx) ** 2 <= r * r] = label


def gen_dataset(
    seed: int, count: int, height: int, width: int, num_classes: int, presence: float = 0.95, noise: float = 0.05
) -> list[SyntheticSample]:
    """Deterministic in ``seed``. Each foreground class is drawn in a sample
    with probability ``presence`` (one or more shapes, fewer per class
    as the class count grows); images are the class colours
    with a per-sample tint and Gaussian pixel noise."""
    if num_classes < 2:
        raise ConfigError("need at least 2 classes")
    if count < 0:
        raise ConfigError("count must be non-negative")
    if height < 16 or width < 16 or height % 16 or width % 16:
        raise ConfigError(f"image size {height}x{width} must be a positive multiple of 16")
    rng = np.random.default_rng(seed)
    palette = class_palette(num_classes)
    samples = []
    for _ in range(count):
        mask = np.zeros((height, width), dtype=np.uint8)
        max_shapes = max(2, 6 // (num_classes - 1))
        for label in rng.permutation(np.arange(1, num_classes)):
            if rng.random() < presence:
                for _ in range(rng.integers(1, max_shapes + 1)):
                    _draw_shape(rng, mask, label)
        tint = rng.normal(0.0, 0.03, size=(num_classes, 3))
        img = (palette + tint)[mask].transpose(2, 0, 1)
        img = img + rng.normal(0.0, noise, size=img.shape)
        img = np.rint(np.clip(img, 0.0, 1.0) * 255) / 255
        samples.append(SyntheticSample(image=img, mask=mask))
    return samples


def save_dataset(samples: list[SyntheticSample], directory, num_classes: int) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, s in enumerate(samples):
        write_ppm(directory / f"{i:05d}.ppm", np.rint(s.image.transpose(1, 2, 0) * 255).astype(np.uint8))
        write_pgm(directory / f"{i:05d}_mask.pgm", s.mask)
    meta = {"count": len(samples), "num_classes": num_classes}
    (directory / "dataset.json").write_text(json.dumps(meta))


def load_dataset(directory) -> tuple[list[SyntheticSample], int]:
    directory = Path(directory)
    try:
        meta = json.loads((directory / "dataset.json").read_text())
    except FileNotFoundError:
        raise ConfigError(f"{directory} has no dataset.json") from None
    samples = []
    for i in range(meta["count"]):
        img = read_ppm(directory / f"{i:05d}.ppm").transpose(2, 0, 1) / 255.0
        mask = read_pgm(directory / f"{i:05d}_mask.pgm")
        samples.append(SyntheticSample(image=img, mask=mask))
    return samples, int(meta["num_classes"])


def stack(samples: list[SyntheticSample], dtype=np.float32) -> tuple[np.ndarray, np.ndarray]:
    images = np.stack([s.image for s in samples]).astype(dtype)
    masks = np.stack([s.mask for s in samples]).astype(np.int64)
    return images, masks
