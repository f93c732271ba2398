"""Neighborhood (sliding-window) attention and global multi-head attention.

Neighborhood windows are clamped at the borders: along an axis of length n a
query at position i attends to ``min(K, n)`` consecutive keys starting at
``clip(i - K // 2, 0, n - min(K, n))``. Logits get a learned relative
position bias indexed by key-minus-query offset.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import ConfigError, ShapeError
from .nn.layers import Conv2d
from .nn.module import Module, Parameter
from .tensor import Tensor, custom_op, matmul, reshape, scale, softmax, split, transpose


def default_heads(channels: int) -> int:
    return max(1, channels // 32)


def _check_heads(channels: int, heads: int) -> int:
    if heads < 1 or channels % heads:
        raise ConfigError(f"{heads} heads do not divide {channels} channels")
    return channels // heads


def natten_core(q: Tensor, k: Tensor, v: Tensor, rpb: Tensor, height: int, width: int, ksize: int) -> Tensor:
    """q, k, v: [B, heads, H*W, head_dim]; rpb: [heads, 2K-1, 2K-1]."""
    if not (q.shape == k.shape == v.shape) or q.shape[2] != height * width:
        raise ShapeError(f"q/k/v shapes {q.shape}/{k.shape}/{v.shape} vs map {height}x{width}")
    if rpb.shape != (q.shape[1], 2 * ksize - 1, 2 * ksize - 1):
        raise ShapeError(f"bias table {rpb.shape} does not match heads={q.shape[1]}, K={ksize}")
    sc = q.shape[3] ** -0.5
    out, attn = kernels.natten_forward(q.data, k.data, v.data, rpb.data, height, width, ksize, sc)

    def vjp(g):
        return kernels.natten_backward(q.data, k.data, v.data, rpb.data, attn, g, height, width, ksize, sc)

    res = custom_op(out, (q, k, v, rpb), vjp, "neighborhood_attention")
    return res


def _split_qkv(qkv: Tensor, heads: int):
    nb, c3, h, w = qkv.shape
    c = c3 // 3
    t = reshape(qkv, (nb, 3, heads, c // heads, h * w))
    return [reshape(p, (nb, heads, c // heads, h * w)) for p in split(t, [1, 1, 1], axis=1)]


class NeighborhoodAttention(Module):
    def __init__(self, channels, window=7, heads=None, rng=None):
        if window < 1 or window % 2 == 0:
            raise ConfigError(f"window size must be a positive odd integer, got {window}")
        self.heads = heads or default_heads(channels)
        _check_heads(channels, self.heads)
        self.window = window
        self.qkv = Conv2d(channels, 3 * channels, 1, rng=rng)
        self.proj = Conv2d(channels, channels, 1, rng=rng)
        self.rpb = Parameter(np.zeros((self.heads, 2 * window - 1, 2 * window - 1)))

    def qkv_tokens(self, x: Tensor):
        """q, k, v as [B, heads, L, head_dim]."""
        return [transpose(t, (0, 1, 3, 2)) for t in _split_qkv(self.qkv(x), self.heads)]

    def forward(self, x: Tensor) -> Tensor:
        nb, c, h, w = x.shape
        q, k, v = self.qkv_tokens(x)
        out = natten_core(q, k, v, self.rpb, h, w, self.window)
        out = reshape(transpose(out, (0, 1, 3, 2)), (nb, c, h, w))
        return self.proj(out)

    def attention_weights(self, x: Tensor) -> np.ndarray:
        """[B, heads, L, Kh*Kw] weights of the last forward on ``x``."""
        _, _, h, w = x.shape
        q, k, v = self.qkv_tokens(x)
        _, attn = kernels.natten_forward(
            q.data, k.data, v.data, self.rpb.data, h, w, self.window, q.shape[3] ** -0.5
        )
        return attn


def neighborhood_attention(x: Tensor, layer: NeighborhoodAttention) -> Tensor:
    return layer(x)


def _np_conv1x1(x, conv: Conv2d):
    w = np.asarray(conv.weight.data, dtype=np.float64)[:, :, 0, 0]
    out = np.einsum("oc,nchw->nohw", w, x)
    if conv.bias is not None:
        out = out + np.asarray(conv.bias.data, dtype=np.float64)[None, :, None, None]
    return out


def natten_oracle(x, layer: NeighborhoodAttention) -> np.ndarray:
    """Masked full attention in float64: every key outside the query's clamped
    window gets a -inf logit. Verification only."""
    x = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    nb, c, h, w = x.shape
    K, heads = layer.window, layer.heads
    hd = c // heads
    qkv = _np_conv1x1(x, layer.qkv).reshape(nb, 3, heads, hd, h * w)
    q, k, v = qkv[:, 0], qkv[:, 1], qkv[:, 2]
    rpb = np.asarray(layer.rpb.data, dtype=np.float64)

    def window(i, n):
        span = min(K, n)
        lo = i - K // 2
        lo = max(lo, 0)
        lo = min(lo, n - span)
        return lo, lo + span

    L = h * w
    bias = np.full((heads, L, L), -np.inf)
    for qi in range(L):
        i, j = divmod(qi, w)
        r0, r1 = window(i, h)
        c0, c1 = window(j, w)
        for ki in range(L):
            a, b = divmod(ki, w)
            if r0 <= a < r1 and c0 <= b < c1:
                bias[:, qi, ki] = rpb[:, a - i + K - 1, b - j + K - 1]
    logits = np.einsum("nhdq,nhdk->nhqk", q, k) * hd ** -0.5 + bias[None]
    logits -= logits.max(-1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(-1, keepdims=True)
    out = np.einsum("nhqk,nhdk->nhdq", p, v).reshape(nb, c, h, w)
    return _np_conv1x1(out, layer.proj)


class GlobalAttention(Module):
    """Multi-head scaled dot-product attention over all H*W tokens."""

    def __init__(self, channels, heads=None, rng=None):
        self.heads = heads or default_heads(channels)
        _check_heads(channels, self.heads)
        self.qkv = Conv2d(channels, 3 * channels, 1, rng=rng)
        self.proj = Conv2d(channels, channels, 1, rng=rng)

    def forward(self, x: Tensor) -> Tensor:
        nb, c, h, w = x.shape
        q, k, v = _split_qkv(self.qkv(x), self.heads)   # [B, heads, hd, L]
        hd = c // self.heads
        logits = scale(matmul(transpose(q, (0, 1, 3, 2)), k), hd ** -0.5)   # [B, heads, Lq, Lk]
        attn = softmax(logits, axis=-1)
        out = matmul(v, transpose(attn, (0, 1, 3, 2)))   # [B, heads, hd, Lq]
        return self.proj(reshape(out, (nb, c, h, w)))


def global_attention(x: Tensor, layer: GlobalAttention) -> Tensor:
    return layer(x)


def global_attention_oracle(x, layer: GlobalAttention) -> np.ndarray:
    """Head-by-head, query-by-query loop in float64. Verification only."""
    x = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    nb, c, h, w = x.shape
    heads = layer.heads
    hd = c // heads
    L = h * w
    qkv = _np_conv1x1(x, layer.qkv).reshape(nb, 3, c, L)
    out = np.zeros((nb, c, L))
    for b in range(nb):
        for hh in range(heads):
            sl = slice(hh * hd, (hh + 1) * hd)
            q, k, v = qkv[b, 0, sl], qkv[b, 1, sl], qkv[b, 2, sl]
            for t in range(L):
                s = np.array([q[:, t] @ k[:, j] for j in range(L)]) * hd ** -0.5
                e = np.exp(s - s.max())
                out[b, sl, t] = v @ (e / e.sum())
    return _np_conv1x1(out.reshape(nb, c, h, w), layer.proj)
