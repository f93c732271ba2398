"""Feature aggregation, multi-scale context scan and the fusion head."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..nn import functional as F
from ..nn.layers import FFN, Conv2d, ConvBNReLU
from ..nn.module import Module
from ..ssm import SS2D
from ..tensor import Tensor, add
from .config import ModelConfig
from .encoder import FeaturePyramid


class MultiScaleContextScan(Module):
    """Joint state-space scan over three scales of the stride-8 map.

    The map, a 3x3/stride-2 aggregate and a 5x5/stride-4 aggregate are brought
    to 1/4 of the input map's resolution (pixel unshuffle by default), each
    projected to ``C`` channels, concatenated and scanned once. A 1x1 conv
    mixes the scales, the result is upsampled back and projected to ``C``.
    """

    def __init__(self, channels, state=1, expansion=1.0, downsample="unshuffle", gate=True, rng=None):
        c = channels
        self.downsample = downsample
        self.down2 = Conv2d(c, c, 3, stride=2, padding=1, rng=rng)
        self.down4 = Conv2d(c, c, 5, stride=4, padding=2, rng=rng)
        lossless = downsample == "unshuffle"
        self.proj_s1 = Conv2d(16 * c if lossless else c, c, 1, rng=rng)
        self.proj_s2 = Conv2d(4 * c if lossless else c, c, 1, rng=rng)
        self.proj_s4 = Conv2d(c, c, 1, rng=rng)
        self.scan = SS2D(3 * c, state, expansion, gate=gate, rng=rng)
        self.mix = Conv2d(3 * c, 3 * c, 1, rng=rng)
        self.out = Conv2d(3 * c, c, 1, rng=rng)

    def scan_input(self, f: Tensor) -> Tensor:
        """The 3C-channel map at 1/4 resolution that enters the scan."""
        h, w = f.shape[2:]
        if h % 4 or w % 4:
            raise ShapeError(f"context scan needs map dims divisible by 4, got {h}x{w}")
        s2 = self.down2(f)
        s4 = self.down4(f)
        if self.downsample == "unshuffle":
            a, b = F.pixel_unshuffle(f, 4), F.pixel_unshuffle(s2, 2)
        else:
            a, b = F.bilinear_resize(f, h // 4, w // 4), F.bilinear_resize(s2, h // 4, w // 4)
        return F.concat_channels([self.proj_s1(a), self.proj_s2(b), self.proj_s4(s4)])

    def forward(self, f: Tensor) -> Tensor:
        h, w = f.shape[2:]
        z = self.mix(self.scan(self.scan_input(f)))
        return self.out(F.bilinear_resize(z, h, w))


def mmscope(f: Tensor, module: MultiScaleContextScan) -> Tensor:
    return module(f)


class Decoder(Module):
    def __init__(self, cfg: ModelConfig, rng=None):
        rng = rng if rng is not None else np.random.default_rng(1)
        cd = cfg.decoder_width
        c2, c3, c4 = cfg.stage_channels[1:]
        self.proj2 = ConvBNReLU(c2, cd, rng)
        self.proj3 = ConvBNReLU(c3, cd, rng)
        self.proj4 = ConvBNReLU(c4, cd, rng)
        self.fuse = ConvBNReLU(3 * cd, cd, rng)
        self.context = (
            MultiScaleContextScan(
                cd, cfg.ssm_state, cfg.ssm_expansion, cfg.context_downsample, cfg.ssm_gate, rng
            )
            if cfg.context_scan
            else None
        )
        self.head = FFN(5 * cd, hidden=cd, out_ch=cfg.num_classes, rng=rng)

    def aggregate(self, pyr: FeaturePyramid):
        """Returns (F, F2', F_up3, F_up4), all at the stride-8 resolution."""
        h, w = pyr.f2.shape[2:]
        f2 = self.proj2(pyr.f2)
        up3 = F.bilinear_resize(self.proj3(pyr.f3), h, w)
        up4 = F.bilinear_resize(self.proj4(pyr.f4), h, w)
        return self.fuse(F.concat_channels([f2, up3, up4])), f2, up3, up4

    def fusion_head(self, fctx: Tensor, f2: Tensor, up3: Tensor, up4: Tensor, out_h: int, out_w: int) -> Tensor:
        h, w = fctx.shape[2:]
        pooled = F.expand_spatial(F.global_avg_pool(up4), h, w)
        feats = [add(fctx, f2), add(fctx, up3), add(fctx, up4), fctx, pooled]
        logits = self.head(F.concat_channels(feats))
        return F.bilinear_resize(logits, out_h, out_w)

    def forward(self, pyr: FeaturePyramid, out_h: int, out_w: int) -> Tensor:
        f, f2, up3, up4 = self.aggregate(pyr)
        fctx = self.context(f) if self.context is not None else f
        return self.fusion_head(fctx, f2, up3, up4, out_h, out_w)


def decoder_aggregate(pyr: FeaturePyramid, decoder: Decoder):
    return decoder.aggregate(pyr)
