"""Toy training loop, AdamW and segmentation metrics."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError, NumericsError
from ..model.config import ModelConfig
from ..model.net import SegmentationNet
from ..tensor import Tensor, backward, cross_entropy
from .data import SyntheticSample, stack

log = logging.getLogger(__name__)


class AdamW:
    """Adam with decoupled weight decay (decay skipped for 1-D parameters)."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        self.params = list(params)
        self.lr, self.betas, self.eps, self.weight_decay = lr, betas, eps, weight_decay
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        b1, b2 = self.betas
        self.t += 1
        c1 = 1 - b1 ** self.t
        c2 = 1 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            if self.weight_decay and p.ndim > 1:
                p.data *= 1 - lr * self.weight_decay
            p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype)


def lr_at(step: int, total: int, base_lr: float, warmup_fraction: float = 0.1) -> float:
    """Linear warmup over the first ``warmup_fraction`` of steps, then cosine to 0."""
    warm = max(1, int(round(warmup_fraction * total)))
    if step < warm:
        return base_lr * (step + 1) / warm
    progress = (step - warm) / max(1, total - warm)
    return 0.5 * base_lr * (1 + math.cos(math.pi * progress))


def confusion_matrix(pred: np.ndarray, target: np.ndarray, num_classes: int) -> np.ndarray:
    idx = target.astype(np.int64).ravel() * num_classes + pred.astype(np.int64).ravel()
    return np.bincount(idx, minlength=num_classes * num_classes).reshape(num_classes, num_classes)


def iou_per_class(conf: np.ndarray) -> np.ndarray:
    """IoU per class; NaN for classes absent from the ground truth."""
    inter = np.diag(conf).astype(np.float64)
    union = conf.sum(0) + conf.sum(1) - inter
    iou = np.where(union > 0, inter / np.maximum(union, 1), np.nan)
    iou[conf.sum(1) == 0] = np.nan
    return iou


def mean_iou(pred, target, num_classes: int) -> float:
    return float(np.nanmean(iou_per_class(confusion_matrix(pred, target, num_classes))))


def pixel_accuracy(pred, target) -> float:
    return float((np.asarray(pred) == np.asarray(target)).mean())


@dataclass
class TrainSettings:
    batch_size: int | None = None   # None: full training split every step
    weight_decay: float = 0.01
    warmup_fraction: float = 0.1
    val_fraction: float = 0.2
    dtype: str = "float32"

    @classmethod
    def from_dict(cls, data: dict) -> "TrainSettings":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown training keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class TrainReport:
    losses: list[float]
    pixel_accuracy: float
    mean_iou: float
    class_iou: list[float]
    seed: int
    config_hash: str
    steps: int
    lr: float
    extra: dict = field(default_factory=dict)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_json(self) -> str:
        d = asdict(self)
        d["digest"] = self.digest()
        return json.dumps(d, indent=2)


def split_dataset(samples, val_fraction):
    n_val = int(round(len(samples) * val_fraction))
    if n_val < 1 or n_val >= len(samples):
        raise ConfigError(f"cannot hold out {val_fraction:.0%} of {len(samples)} samples")
    return samples[:-n_val], samples[-n_val:]


def evaluate(model: SegmentationNet, samples: list[SyntheticSample], num_classes: int, batch: int = 16):
    model.eval()
    preds, masks = [], []
    for i in range(0, len(samples), batch):
        imgs, m = stack(samples[i:i + batch], model.dtype)
        preds.append(model.predict(imgs))
        masks.append(m)
    pred, target = np.concatenate(preds), np.concatenate(masks)
    conf = confusion_matrix(pred, target, num_classes)
    iou = iou_per_class(conf)
    return pixel_accuracy(pred, target), float(np.nanmean(iou)), iou


def train(
    cfg: ModelConfig,
    dataset: list[SyntheticSample],
    steps: int,
    lr: float,
    seed: int,
    settings: TrainSettings | None = None,
) -> tuple[TrainReport, SegmentationNet]:
    """Train on the leading split of ``dataset`` and score the held-out tail."""
    if steps < 1:
        raise ConfigError("steps must be >= 1")
    settings = settings or TrainSettings()
    train_set, val_set = split_dataset(dataset, settings.val_fraction)
    model = SegmentationNet(cfg, seed=seed, dtype=np.dtype(settings.dtype))
    opt = AdamW(model.parameters(), lr=lr, weight_decay=settings.weight_decay)
    images, masks = stack(train_set, model.dtype)
    rng = np.random.default_rng(seed + 1)
    bs = settings.batch_size or len(train_set)
    losses = []
    model.train()
    for step in range(steps):
        idx = np.arange(len(train_set)) if bs >= len(train_set) else rng.choice(len(train_set), bs, replace=False)
        model.zero_grad()
        try:
            loss = cross_entropy(model(Tensor(images[idx])), masks[idx], axis=1)
            backward(loss)
        except NumericsError as exc:
            raise NumericsError(f"step {step}: {exc}") from None
        value = float(loss.data)
        losses.append(value)
        opt.step(lr_at(step, steps, lr, settings.warmup_fraction))
        if step % 25 == 0 or step == steps - 1:
            log.info("step %d loss %.4f", step, value)
    acc, miou, iou = evaluate(model, val_set, cfg.num_classes)
    report = TrainReport(
        losses=losses,
        pixel_accuracy=acc,
        mean_iou=miou,
        class_iou=[None if np.isnan(v) else float(v) for v in iou],
        seed=seed,
        config_hash=cfg.digest(),
        steps=steps,
        lr=lr,
        extra={"train_samples": len(train_set), "val_samples": len(val_set)},
    )
    return report, model
