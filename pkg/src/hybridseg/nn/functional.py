"""Image-domain primitives on NCHW tensors, each with a hand-written VJP."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import ShapeError
from ..tensor import Tensor, custom_op


def _pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        return int(v[0]), int(v[1])
    return int(v), int(v)


def conv_out_size(n: int, k: int, s: int, p: int) -> int:
    return (n + 2 * p - k) // s + 1


def _im2col(xp, kh, kw, sh, sw, ho, wo):
    # [N, C, Hp, Wp] -> [N, C, kh*kw, ho, wo]
    taps = [
        xp[:, :, i:i + sh * (ho - 1) + 1:sh, j:j + sw * (wo - 1) + 1:sw]
        for i in range(kh)
        for j in range(kw)
    ]
    return np.stack(taps, axis=2)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride=1, padding=0, groups: int = 1) -> Tensor:
    """Zero-padded grouped cross-correlation."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects NCHW input and OIHW weight, got {x.shape}, {weight.shape}")
    n, c, h, w = x.shape
    oc, cg, kh, kw = weight.shape
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    if groups < 1 or c % groups or oc % groups or cg != c // groups:
        raise ShapeError(f"channels {c}->{oc} with weight {weight.shape} incompatible with groups={groups}")
    if bias is not None and bias.shape != (oc,):
        raise ShapeError(f"bias shape {bias.shape} != ({oc},)")
    ho, wo = conv_out_size(h, kh, sh, ph), conv_out_size(w, kw, sw, pw)
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv output {ho}x{wo} from input {h}x{w}, kernel {kh}x{kw}")
    og = oc // groups
    pointwise = kh == kw == 1 and sh == sw == 1 and ph == pw == 0
    depthwise = cg == 1 and og == 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x.data
    if pointwise:
        cols = xp.reshape(n, groups, cg, ho * wo)
    else:
        cols = _im2col(xp, kh, kw, sh, sw, ho, wo).reshape(n, groups, cg * kh * kw, ho * wo)
    wmat = weight.data.reshape(groups, og, cg * kh * kw)
    if depthwise:
        out = np.einsum("gk,ngkl->ngl", wmat[:, 0], cols)
    else:
        out = np.matmul(wmat, cols)
    out = out.reshape(n, oc, ho, wo)
    if bias is not None:
        out = out + bias.data.reshape(1, oc, 1, 1)

    def vjp(g):
        g3 = g.reshape(n, groups, og, ho * wo)
        if depthwise:
            dcols = wmat[None, :, 0, :, None] * g3
            dw = np.einsum("ngl,ngkl->gk", g3[:, :, 0], cols)[:, None]
        else:
            dcols = np.matmul(np.swapaxes(wmat, -1, -2), g3)
            dw = np.matmul(g3, np.swapaxes(cols, -1, -2)).sum(axis=0)
        if pointwise:
            dx = dcols.reshape(x.shape)
        else:
            dc = dcols.reshape(n, c, kh * kw, ho, wo)
            dxp = np.zeros(xp.shape, dtype=x.dtype)
            t = 0
            for i in range(kh):
                for j in range(kw):
                    dxp[:, :, i:i + sh * (ho - 1) + 1:sh, j:j + sw * (wo - 1) + 1:sw] += dc[:, :, t]
                    t += 1
            dx = dxp[:, :, ph:ph + h, pw:pw + w]
        grads = [np.ascontiguousarray(dx), dw.reshape(weight.shape)]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return custom_op(out, parents, vjp, "conv2d")


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel normalisation over (N, H, W).

    In training mode batch statistics are used and the running buffers are
    updated in place (unbiased variance); in eval mode only the running
    statistics are read.
    """
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,) or running_mean.shape != (c,):
        raise ShapeError(f"batch_norm parameters do not match {c} channels")
    view = (1, c) + (1,) * (x.ndim - 2)
    axes = (0,) + tuple(range(2, x.ndim))
    gv = gamma.data.reshape(view)
    if not training:
        rstd = 1.0 / np.sqrt(running_var.reshape(view) + eps)
        out = (x.data - running_mean.reshape(view)) * rstd * gv + beta.data.reshape(view)
        xhat = (x.data - running_mean.reshape(view)) * rstd

        def vjp_eval(g):
            return g * gv * rstd, (g * xhat).sum(axis=axes), g.sum(axis=axes)

        return custom_op(out.astype(x.dtype), (x, gamma, beta), vjp_eval, "batch_norm")

    m = x.size // c
    mu = x.data.mean(axis=axes, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=axes, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    out = xhat * gv + beta.data.reshape(view)
    unbiased = var.reshape(c) * (m / (m - 1) if m > 1 else 1.0)
    running_mean *= 1 - momentum
    running_mean += momentum * mu.reshape(c)
    running_var *= 1 - momentum
    running_var += momentum * unbiased

    def vjp(g):
        dxhat = g * gv
        dx = rstd * (
            dxhat - dxhat.mean(axis=axes, keepdims=True) - xhat * (dxhat * xhat).mean(axis=axes, keepdims=True)
        )
        return dx, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    return custom_op(out, (x, gamma, beta), vjp, "batch_norm")


@lru_cache(maxsize=128)
def resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    """[n_out, n_in] half-pixel (align_corners=False) linear interpolation weights."""
    m = np.zeros((n_out, n_in))
    ratio = n_in / n_out
    for o in range(n_out):
        src = max((o + 0.5) * ratio - 0.5, 0.0)
        i0 = min(int(np.floor(src)), n_in - 1)
        i1 = min(i0 + 1, n_in - 1)
        frac = src - i0
        m[o, i0] += 1.0 - frac
        m[o, i1] += frac
    return m


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"target size {out_h}x{out_w} must be positive")
    _, _, h, w = x.shape
    if (h, w) == (out_h, out_w):
        return custom_op(x.data.copy(), (x,), lambda g: (g,), "bilinear_resize")
    rh = resize_matrix(h, out_h).astype(x.dtype)
    rw = resize_matrix(w, out_w).astype(x.dtype)
    out = np.matmul(np.matmul(rh, x.data), rw.T)

    def vjp(g):
        return (np.matmul(np.matmul(rh.T, g), rw),)

    return custom_op(out, (x,), vjp, "bilinear_resize")


def _unshuffle(a: np.ndarray, r: int) -> np.ndarray:
    n, c, h, w = a.shape
    a = a.reshape(n, c, h // r, r, w // r, r).transpose(0, 1, 3, 5, 2, 4)
    return a.reshape(n, c * r * r, h // r, w // r)


def _shuffle(a: np.ndarray, r: int) -> np.ndarray:
    n, c, h, w = a.shape
    a = a.reshape(n, c // (r * r), r, r, h, w).transpose(0, 1, 4, 2, 5, 3)
    return a.reshape(n, c // (r * r), h * r, w * r)


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """Space-to-channel: out channel ``c*r*r + i*r + j`` holds offset (i, j)."""
    _, _, h, w = x.shape
    if r < 1 or h % r or w % r:
        raise ShapeError(f"factor {r} does not divide {h}x{w}")
    return custom_op(_unshuffle(x.data, r), (x,), lambda g: (_shuffle(g, r),), "pixel_unshuffle")


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    if r < 1 or x.shape[1] % (r * r):
        raise ShapeError(f"channels {x.shape[1]} not divisible by {r}^2")
    return custom_op(_shuffle(x.data, r), (x,), lambda g: (_unshuffle(g, r),), "pixel_shuffle")


def global_avg_pool(x: Tensor) -> Tensor:
    hw = x.shape[2] * x.shape[3]
    out = x.data.mean(axis=(2, 3), keepdims=True)
    return custom_op(out, (x,), lambda g: (np.broadcast_to(g / hw, x.shape).copy(),), "global_avg_pool")


def expand_spatial(x: Tensor, h: int, w: int) -> Tensor:
    """Broadcast an [N, C, 1, 1] map to [N, C, h, w]."""
    if x.shape[2:] != (1, 1):
        raise ShapeError(f"expand_spatial needs a 1x1 map, got {x.shape}")
    out = np.broadcast_to(x.data, x.shape[:2] + (h, w)).copy()
    return custom_op(out, (x,), lambda g: (g.sum(axis=(2, 3), keepdims=True),), "expand_spatial")


def pad_bottom_right(x: Tensor, ph: int, pw: int) -> Tensor:
    if ph == 0 and pw == 0:
        return x
    h, w = x.shape[2:]
    out = np.pad(x.data, ((0, 0), (0, 0), (0, ph), (0, pw)))
    return custom_op(out, (x,), lambda g: (np.ascontiguousarray(g[:, :, :h, :w]),), "pad")


def crop(x: Tensor, h: int, w: int) -> Tensor:
    """Keep the top-left h x w window."""
    if (h, w) == x.shape[2:]:
        return x

    def vjp(g):
        full = np.zeros(x.shape, dtype=x.dtype)
        full[:, :, :h, :w] = g
        return (full,)

    return custom_op(x.data[:, :, :h, :w].copy(), (x,), vjp, "crop")


def concat_channels(xs) -> Tensor:
    from ..tensor import concat

    xs = list(xs)
    for t in xs[1:]:
        if t.shape[0] != xs[0].shape[0] or t.shape[2:] != xs[0].shape[2:]:
            raise ShapeError(f"concat_channels: {xs[0].shape} vs {t.shape}")
    return concat(xs, axis=1)
