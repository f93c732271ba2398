"""Selective state-space scan and its four-direction 2-D wrapper.

Recurrence per batch b, channel d and state n (zero initial state)::

    h[t] = exp(delta[t] * A[d, n]) * h[t-1] + delta[t] * B[t, n] * u[t]
    y[t] = sum_n C[t, n] * h[t] + D[d] * u[t]

``delta``, ``B`` and ``C`` are computed per token from ``u`` (the selective
part). The recurrence itself runs in :mod:`hybridseg.kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import ConfigError, NumericsError, ShapeError
from .nn.layers import Conv2d, LayerNorm2d
from .nn.module import Module, Parameter, trunc_normal
from .tensor import (
    Tensor,
    add,
    custom_op,
    exp,
    gather_tokens,
    matmul,
    mul,
    neg,
    reshape,
    scatter_tokens,
    silu,
    softplus,
    split,
    transpose,
)


def default_dt_rank(channels: int) -> int:
    return max(1, math.ceil(channels / 16))


def init_dt_bias(rng: np.random.Generator, size, dt_min=1e-3, dt_max=1e-1) -> np.ndarray:
    """Bias whose softplus is log-uniform in [dt_min, dt_max]."""
    dt = np.exp(rng.uniform(np.log(dt_min), np.log(dt_max), size=size))
    return dt + np.log(-np.expm1(-dt))


def init_a_log(channels: int, state: int) -> np.ndarray:
    return np.log(np.tile(np.arange(1, state + 1, dtype=np.float64), (channels, 1)))


@dataclass
class SsmParams:
    """Parameters of one scan direction over ``D`` channels.

    x_proj: [R + 2N, D], producing (delta_hat, B, C) per token.
    dt_proj: [D, R] with bias dt_bias: [D].
    """

    A_log: Tensor
    x_proj: Tensor
    dt_proj: Tensor
    dt_bias: Tensor
    D_skip: Tensor
    x_proj_bias: Tensor | None = None
    A_override: np.ndarray | None = None  # test hook replacing -exp(A_log)

    @property
    def channels(self) -> int:
        return self.A_log.shape[0]

    @property
    def state(self) -> int:
        return self.A_log.shape[1]

    @property
    def dt_rank(self) -> int:
        return self.dt_proj.shape[1]

    def A(self) -> Tensor:
        if self.A_override is not None:
            return Tensor(np.asarray(self.A_override, dtype=self.A_log.dtype))
        return neg(exp(self.A_log))

    def tensors(self) -> list[Tensor]:
        ts = [self.A_log, self.x_proj, self.dt_proj, self.dt_bias, self.D_skip]
        return ts + ([self.x_proj_bias] if self.x_proj_bias is not None else [])

    @classmethod
    def init(cls, channels: int, state: int = 1, dt_rank: int | None = None, rng=None, dtype=np.float64):
        rng = rng if rng is not None else np.random.default_rng(0)
        r = dt_rank or default_dt_rank(channels)
        bound = r ** -0.5
        return cls(
            A_log=Parameter(init_a_log(channels, state), dtype),
            x_proj=Parameter(trunc_normal(rng, (r + 2 * state, channels)), dtype),
            dt_proj=Parameter(rng.uniform(-bound, bound, (channels, r)), dtype),
            dt_bias=Parameter(init_dt_bias(rng, channels), dtype),
            D_skip=Parameter(np.ones(channels), dtype),
        )


def selective_scan(u: Tensor, delta: Tensor, A: Tensor, B: Tensor, C: Tensor, D: Tensor) -> Tensor:
    """Grouped scan core.

    u, delta: [batch, D, L]; A: [D, N]; B, C: [batch, G, N, L] where channel d
    reads group ``d // (D / G)``; D: [D].
    """
    nb, nd, nl = u.shape
    if delta.shape != u.shape or A.ndim != 2 or A.shape[0] != nd or D.shape != (nd,):
        raise ShapeError(f"scan shapes u{u.shape} delta{delta.shape} A{A.shape} D{D.shape}")
    if B.shape != C.shape or B.ndim != 4 or B.shape[0] != nb or B.shape[2:] != (A.shape[1], nl):
        raise ShapeError(f"scan B{B.shape} / C{C.shape} incompatible with u{u.shape}, A{A.shape}")
    if nd % B.shape[1]:
        raise ShapeError(f"{nd} channels cannot be split into {B.shape[1]} groups")
    y = kernels.scan_forward(u.data, delta.data, A.data, B.data, C.data, D.data)

    def vjp(g):
        return kernels.scan_backward(u.data, delta.data, A.data, B.data, C.data, D.data, g)

    return custom_op(y, (u, delta, A, B, C, D), vjp, "selective_scan")


def _project(u: Tensor, p: SsmParams):
    xd = matmul(p.x_proj, u)
    if p.x_proj_bias is not None:
        xd = add(xd, p.x_proj_bias)
    dt_hat, Bm, Cm = split(xd, [p.dt_rank, p.state, p.state], axis=1)
    delta = softplus(add(matmul(p.dt_proj, dt_hat), p.dt_bias))
    return delta, Bm, Cm


def selective_scan_1d(u: Tensor, p: SsmParams) -> Tensor:
    """Selective scan of u: [batch, D, L] with token-dependent delta, B, C."""
    if u.ndim != 3 or u.shape[1] != p.channels:
        raise ShapeError(f"input {u.shape} does not match {p.channels} scan channels")
    nb, _, nl = u.shape
    delta, Bm, Cm = _project(u, p)
    Bm = reshape(Bm, (nb, 1, p.state, nl))
    Cm = reshape(Cm, (nb, 1, p.state, nl))
    return selective_scan(u, delta, p.A(), Bm, Cm, p.D_skip)


def _softplus(x):
    return np.logaddexp(0.0, x)


def selective_scan_ref(u, p: SsmParams) -> np.ndarray:
    """Literal per-timestep evaluation in float64. Verification only."""
    u = np.asarray(u.data if isinstance(u, Tensor) else u, dtype=np.float64)
    nb, nd, nl = u.shape
    f = lambda t: None if t is None else np.asarray(t.data, dtype=np.float64)  # noqa: E731
    wx, wdt, bdt, dskip, bx = f(p.x_proj), f(p.dt_proj), f(p.dt_bias), f(p.D_skip), f(p.x_proj_bias)
    A = np.asarray(p.A_override, dtype=np.float64) if p.A_override is not None else -np.exp(f(p.A_log))
    r, n_state = p.dt_rank, p.state
    y = np.zeros((nb, nd, nl))
    for b in range(nb):
        h = np.zeros((nd, n_state))
        for t in range(nl):
            x_t = u[b, :, t]
            proj = wx @ x_t
            if bx is not None:
                proj = proj + bx
            dt_hat, B_t, C_t = proj[:r], proj[r:r + n_state], proj[r + n_state:]
            delta = _softplus(wdt @ dt_hat + bdt)
            for d in range(nd):
                acc = 0.0
                for n in range(n_state):
                    h[d, n] = math.exp(delta[d] * A[d, n]) * h[d, n] + delta[d] * B_t[n] * x_t[d]
                    acc += C_t[n] * h[d, n]
                y[b, d, t] = acc + dskip[d] * x_t[d]
    if not np.isfinite(y).all():
        raise NumericsError("reference scan produced non-finite values")
    return y


# -- four scan orders ---------------------------------------------------------
@lru_cache(maxsize=128)
def scan_orders(height: int, width: int) -> np.ndarray:
    """[4, H*W] token orders: row-major, its reverse, column-major, its reverse."""
    grid = np.arange(height * width).reshape(height, width)
    rows = grid.ravel()
    cols = grid.T.ravel()
    orders = np.stack([rows, rows[::-1], cols, cols[::-1]])
    orders.setflags(write=False)
    return orders


def _check_dir(direction: int) -> None:
    if direction not in (0, 1, 2, 3):
        raise ConfigError(f"scan direction must be 0..3, got {direction!r}")


def directional_reorder(x: Tensor, direction: int) -> Tensor:
    """[B, C, H, W] -> [B, C, H*W] in the given scan order."""
    _check_dir(direction)
    nb, c, h, w = x.shape
    perm = scan_orders(h, w)[direction:direction + 1]
    return reshape(gather_tokens(reshape(x, (nb, c, h * w)), perm), (nb, c, h * w))


def directional_restore(seq: Tensor, direction: int, height: int, width: int) -> Tensor:
    """Inverse of :func:`directional_reorder`."""
    _check_dir(direction)
    nb, c, L = seq.shape
    if L != height * width:
        raise ShapeError(f"sequence length {L} != {height}x{width}")
    perm = scan_orders(height, width)[direction:direction + 1]
    return reshape(scatter_tokens(reshape(seq, (nb, c, 1, L)), perm), (nb, c, height, width))


class SS2D(Module):
    """Projection, depthwise conv and four-direction selective scan with gating.

    Each direction owns its delta/B/C projections, A and skip term; all four
    read the same value branch.
    """

    def __init__(self, channels, state=1, expansion=1.0, dt_rank=None, gate=True, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        inner = int(round(expansion * channels))
        if inner < 1 or state < 1:
            raise ConfigError(f"invalid SS2D widths: inner={inner}, state={state}")
        self.inner, self.state, self.gate = inner, state, gate
        self.dt_rank = dt_rank or default_dt_rank(inner)
        r = self.dt_rank
        self.in_proj = Conv2d(channels, 2 * inner if gate else inner, 1, bias=False, rng=rng)
        self.dwconv = Conv2d(inner, inner, 3, padding=1, groups=inner, rng=rng)
        self.x_proj = Parameter(trunc_normal(rng, (4, r + 2 * state, inner)))
        self.dt_proj = Parameter(rng.uniform(-(r ** -0.5), r ** -0.5, (4, inner, r)))
        self.dt_bias = Parameter(init_dt_bias(rng, 4 * inner))
        self.A_log = Parameter(init_a_log(4 * inner, state))
        self.D_skip = Parameter(np.ones(4 * inner))
        self.out_norm = LayerNorm2d(inner)
        self.out_proj = Conv2d(inner, channels, 1, bias=False, rng=rng)

    def direction_params(self, k: int) -> SsmParams:
        """Copy of direction k's parameters as a standalone SsmParams."""
        _check_dir(k)
        sl = slice(k * self.inner, (k + 1) * self.inner)
        cp = lambda a: Tensor(a.copy())  # noqa: E731
        return SsmParams(
            A_log=cp(self.A_log.data[sl]),
            x_proj=cp(self.x_proj.data[k]),
            dt_proj=cp(self.dt_proj.data[k]),
            dt_bias=cp(self.dt_bias.data[sl]),
            D_skip=cp(self.D_skip.data[sl]),
        )

    def value_branch(self, x: Tensor):
        xz = self.in_proj(x)
        if self.gate:
            xv, z = split(xz, [self.inner, self.inner], axis=1)
        else:
            xv, z = xz, None
        return silu(self.dwconv(xv)), z

    def directional_outputs(self, xv: Tensor) -> Tensor:
        """Per-direction scan outputs [B, 4, inner, L], each in its own token order."""
        nb, ci, h, w = xv.shape
        L = h * w
        perms = scan_orders(h, w)
        xs = transpose(gather_tokens(reshape(xv, (nb, ci, L)), perms), (0, 2, 1, 3))
        xd = matmul(self.x_proj, xs)
        dt_hat, Bm, Cm = split(xd, [self.dt_rank, self.state, self.state], axis=2)
        dt = reshape(matmul(self.dt_proj, dt_hat), (nb, 4 * ci, L))
        delta = softplus(add(dt, self.dt_bias))
        A = neg(exp(self.A_log))
        y = selective_scan(reshape(xs, (nb, 4 * ci, L)), delta, A, Bm, Cm, self.D_skip)
        return reshape(y, (nb, 4, ci, L))

    def scan(self, xv: Tensor) -> Tensor:
        """Sum of the four restored directional scans, [B, inner, H, W]."""
        nb, ci, h, w = xv.shape
        y = transpose(self.directional_outputs(xv), (0, 2, 1, 3))
        return reshape(scatter_tokens(y, scan_orders(h, w)), (nb, ci, h, w))

    def forward(self, x: Tensor) -> Tensor:
        xv, z = self.value_branch(x)
        y = self.out_norm(self.scan(xv))
        if z is not None:
            y = mul(y, silu(z))
        return self.out_proj(y)


def ss2d_forward(x: Tensor, block: SS2D) -> Tensor:
    return block(x)
