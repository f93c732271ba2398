"""Hierarchical encoder built from local-attention / state-space blocks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..attention import GlobalAttention, NeighborhoodAttention
from ..errors import ShapeError
from ..nn.layers import FFN, BatchNorm2d, Conv2d, LayerNorm2d
from ..nn.module import Module
from ..ssm import SS2D
from ..tensor import Tensor, add, gelu
from .config import ModelConfig


@dataclass
class FeaturePyramid:
    """Encoder outputs at strides 4, 8, 16, 32."""

    f1: Tensor
    f2: Tensor
    f3: Tensor
    f4: Tensor

    def __iter__(self):
        return iter((self.f1, self.f2, self.f3, self.f4))

    def __getitem__(self, i: int) -> Tensor:
        return (self.f1, self.f2, self.f3, self.f4)[i]


class LassBlock(Module):
    """Pre-norm block: x + fuse(natten(LN x) + global(natten(LN x))), then x + FFN(LN x).

    The global mixer is the four-direction scan, or full self-attention in
    the last stage. Either half may be disabled through ``ModelConfig.mixer``.
    """

    def __init__(self, channels: int, window: int, stage: int, cfg: ModelConfig, rng=None):
        self.norm1 = LayerNorm2d(channels)
        self.local = NeighborhoodAttention(channels, window, rng=rng) if cfg.uses_natten() else None
        if cfg.uses_global_attention(stage):
            self.global_mixer = GlobalAttention(channels, rng=rng)
        elif cfg.uses_ss2d(stage):
            self.global_mixer = SS2D(
                channels, cfg.ssm_state, cfg.ssm_expansion, gate=cfg.ssm_gate, rng=rng
            )
        else:
            self.global_mixer = None
        self.fuse = Conv2d(channels, channels, 1, rng=rng)
        self.norm2 = LayerNorm2d(channels)
        self.ffn = FFN(channels, cfg.ffn_ratio, rng=rng)

    def mix(self, x: Tensor) -> Tensor:
        local = self.local(x) if self.local is not None else x
        if self.global_mixer is not None:
            local = add(local, self.global_mixer(local))
        return self.fuse(local)

    def forward(self, x: Tensor) -> Tensor:
        x = add(x, self.mix(self.norm1(x)))
        return add(x, self.ffn(self.norm2(x)))


def lass_block(x: Tensor, block: LassBlock) -> Tensor:
    return block(x)


class Stem(Module):
    """Two stride-2 3x3 convs with BN + GELU between: stride 4 overall."""

    def __init__(self, out_ch: int, mid_ch: int, rng=None):
        self.conv1 = Conv2d(3, mid_ch, 3, stride=2, padding=1, rng=rng)
        self.bn = BatchNorm2d(mid_ch)
        self.conv2 = Conv2d(mid_ch, out_ch, 3, stride=2, padding=1, rng=rng)

    def forward(self, x):
        return self.conv2(gelu(self.bn(self.conv1(x))))


class Downsample(Module):
    def __init__(self, in_ch, out_ch, rng=None):
        self.conv = Conv2d(in_ch, out_ch, 3, stride=2, padding=1, rng=rng)
        self.bn = BatchNorm2d(out_ch)

    def forward(self, x):
        return self.bn(self.conv(x))


class Stage(Module):
    def __init__(self, index: int, in_ch: int, cfg: ModelConfig, rng=None):
        c = cfg.stage_channels[index]
        self.entry = Stem(c, cfg.stem_width, rng) if index == 0 else Downsample(in_ch, c, rng)
        self.blocks = [
            LassBlock(c, cfg.window_sizes[index], index, cfg, rng) for _ in range(cfg.stage_blocks[index])
        ]

    def forward(self, x):
        x = self.entry(x)
        for blk in self.blocks:
            x = blk(x)
        return x


class Encoder(Module):
    def __init__(self, cfg: ModelConfig, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.cfg = cfg
        chans = [3] + cfg.stage_channels
        self.stages = [Stage(i, chans[i], cfg, rng) for i in range(4)]

    def forward(self, img: Tensor) -> FeaturePyramid:
        if img.ndim != 4 or img.shape[1] != 3:
            raise ShapeError(f"encoder expects [B, 3, H, W], got {img.shape}")
        h, w = img.shape[2:]
        if h % 32 or w % 32:
            raise ShapeError(f"input {h}x{w} must be divisible by 32")
        feats = []
        x = img
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return FeaturePyramid(*feats)


def encoder_forward(img: Tensor, encoder: Encoder) -> FeaturePyramid:
    return encoder(img)
