"""Effective receptive field maps and a receptive-field reachability oracle."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..model.config import ModelConfig
from ..tensor import Tensor, backward


def erf_map(
    forward: Callable[[Tensor], Tensor],
    height: int,
    width: int,
    samples: int = 4,
    seed: int = 0,
    dtype=np.float64,
) -> np.ndarray:
    """Mean |d(centre-pixel feature sum) / d(input)| over random inputs.

    ``forward`` maps a [1, 3, H, W] image to a [1, C, h, w] feature map. The
    gradient magnitude is summed over input channels and scaled to max 1.
    """
    rng = np.random.default_rng(seed)
    acc = np.zeros((height, width))
    for _ in range(samples):
        x = Tensor(rng.random((1, 3, height, width)).astype(dtype), requires_grad=True)
        feat = forward(x)
        seed_grad = np.zeros(feat.shape, dtype=feat.dtype)
        seed_grad[0, :, feat.shape[2] // 2, feat.shape[3] // 2] = 1.0
        backward(feat, seed_grad)
        acc += np.abs(x.grad[0]).sum(axis=0)
    peak = acc.max()
    return acc / peak if peak > 0 else acc


def _window_span(i, n, k):
    span = min(k, n)
    lo = min(max(i - k // 2, 0), n - span)
    return lo, lo + span


def _natten_preimage(mask: np.ndarray, k: int) -> np.ndarray:
    h, w = mask.shape
    out = mask.copy()
    for i, j in zip(*np.nonzero(mask)):
        r0, r1 = _window_span(i, h, k)
        c0, c1 = _window_span(j, w, k)
        out[r0:r1, c0:c1] = True
    return out


def _conv_preimage(mask: np.ndarray, in_h: int, in_w: int, k: int, s: int, p: int) -> np.ndarray:
    out = np.zeros((in_h, in_w), dtype=bool)
    for i, j in zip(*np.nonzero(mask)):
        r0, c0 = i * s - p, j * s - p
        out[max(r0, 0):max(0, min(r0 + k, in_h)), max(c0, 0):max(0, min(c0 + k, in_w))] = True
    return out


def reachable_mask(cfg: ModelConfig, height: int, width: int, stage: int = 0) -> np.ndarray:
    """Input pixels that can influence the centre of stage ``stage``'s output.

    Walks the encoder backwards in eval mode, where every layer is pointwise
    except the strided 3x3 convs, the clamped attention windows and the
    global mixers (which make everything reachable).
    """
    sizes = [(height >> (s + 2), width >> (s + 2)) for s in range(4)]
    h, w = sizes[stage]
    mask = np.zeros((h, w), dtype=bool)
    mask[h // 2, w // 2] = True
    for s in range(stage, -1, -1):
        global_mixer = cfg.uses_ss2d(s) or cfg.uses_global_attention(s)
        for _ in range(cfg.stage_blocks[s]):
            if global_mixer:
                mask[:] = True
            elif cfg.uses_natten():
                mask = _natten_preimage(mask, cfg.window_sizes[s])
        if s == 0:
            mask = _conv_preimage(mask, height // 2, width // 2, 3, 2, 1)
            mask = _conv_preimage(mask, height, width, 3, 2, 1)
        else:
            mask = _conv_preimage(mask, *sizes[s - 1], 3, 2, 1)
    return mask
