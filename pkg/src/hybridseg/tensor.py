"""Dense tensors with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a contiguous numpy buffer (float32 or float64). Every
differentiable operation records its parents and a vector-Jacobian product
(VJP) on the output tensor; :func:`backward` walks that graph in reverse
topological order and accumulates gradients on the leaves.

Broadcasting is deliberately narrow: an operand may be a Python scalar, a
tensor of identical shape, or a 1-D tensor broadcast along the channel axis
(axis 1).
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import special

from .errors import GraphError, NumericsError, ShapeError

FLOAT_TYPES = (np.float32, np.float64)

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp", "op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in FLOAT_TYPES:
            arr = arr.astype(np.float64 if dtype is None else dtype)
        if 0 in arr.shape:
            raise ShapeError(f"zero-sized dimension in shape {arr.shape}")
        self.data = _contiguous(arr)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Callable | None = None
        self.op = "leaf"

    # -- basic attributes -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> Tensor:
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, seed=None) -> None:
        backward(self, seed)

    def __repr__(self) -> str:
        rg = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{rg}, op={self.op})"

    # -- operator sugar ---------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes)

    def sum(self, axis=None):
        return sum_(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def _contiguous(arr: np.ndarray) -> np.ndarray:
    # np.ascontiguousarray would promote 0-d arrays to shape (1,)
    return arr if arr.flags.c_contiguous else arr.copy(order="C")


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.isfinite(arr).all():
        raise NumericsError(f"non-finite values produced by '{op}'")


def _make(data: np.ndarray, parents: Sequence[Tensor], vjp: Callable, op: str) -> Tensor:
    """Wrap an op result and record it on the graph when any parent needs grad."""
    _check_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = _contiguous(np.asarray(data))
    out.grad = None
    out.op = op
    need = _grad_enabled and any(p.requires_grad for p in parents)
    out.requires_grad = need
    if need:
        out._parents = tuple(parents)
        out._vjp = vjp
    else:
        out._parents = ()
        out._vjp = None
    return out


def _same_dtype(a: Tensor, b: Tensor) -> None:
    if a.dtype != b.dtype:
        raise TypeError(f"mixed float widths in one graph: {a.dtype} vs {b.dtype}")


# -- backward ---------------------------------------------------------------
def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Tensor, seed=None) -> None:
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every grad-requiring leaf.

    ``seed`` defaults to 1 and must be given explicitly for non-scalar roots.
    Repeated calls accumulate.
    """
    if not isinstance(root, Tensor) or not root.requires_grad:
        raise GraphError("root is not on a recorded graph (requires_grad is False)")
    if seed is None:
        if root.size != 1:
            raise GraphError(f"non-scalar root of shape {root.shape} needs a seed gradient")
        seed = np.ones(root.shape, dtype=root.dtype)
    else:
        seed = np.asarray(seed, dtype=root.dtype)
        if seed.shape != root.shape:
            raise ShapeError(f"seed shape {seed.shape} != root shape {root.shape}")

    grads: dict[int, np.ndarray] = {id(root): seed}
    for node in reversed(_topo_order(root)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        pgrads = node._vjp(g)
        for p, pg in zip(node._parents, pgrads):
            if pg is None or not p.requires_grad:
                continue
            if pg.shape != p.shape:
                raise ShapeError(f"VJP of '{node.op}' returned {pg.shape} for input {p.shape}")
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


# -- broadcasting helpers ---------------------------------------------------
def _broadcast_kind(a: Tensor, b: Tensor) -> str:
    if a.shape == b.shape:
        return "same"
    if b.ndim == 1 and a.ndim >= 2 and b.shape[0] == a.shape[1]:
        return "channel"
    if b.size == 1 and b.ndim == 0:
        return "scalar"
    raise ShapeError(f"shapes {a.shape} and {b.shape} are not broadcast-compatible")


def _channel_view(b: np.ndarray, ndim: int) -> np.ndarray:
    return b.reshape((1, -1) + (1,) * (ndim - 2))


def _channel_reduce(g: np.ndarray) -> np.ndarray:
    axes = (0,) + tuple(range(2, g.ndim))
    return g.sum(axis=axes)


# -- elementwise suite ------------------------------------------------------
def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        return add_scalar(a, b)
    _same_dtype(a, b)
    kind = _broadcast_kind(a, b)
    if kind == "channel":
        out = a.data + _channel_view(b.data, a.ndim)
        return _make(out, (a, b), lambda g: (g, _channel_reduce(g)), "add")
    if kind == "scalar":
        return _make(a.data + b.data, (a, b), lambda g: (g, g.sum().reshape(())), "add")
    return _make(a.data + b.data, (a, b), lambda g: (g, g), "add")


def add_scalar(a: Tensor, c: float) -> Tensor:
    return _make(a.data + a.dtype.type(c), (a,), lambda g: (g,), "add_scalar")


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def sub(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        return add_scalar(a, -b)
    return add(a, neg(b))


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        return scale(a, b)
    _same_dtype(a, b)
    kind = _broadcast_kind(a, b)
    if kind == "channel":
        bv = _channel_view(b.data, a.ndim)
        return _make(a.data * bv, (a, b), lambda g: (g * bv, _channel_reduce(g * a.data)), "mul")
    if kind == "scalar":
        return _make(a.data * b.data, (a, b), lambda g: (g * b.data, (g * a.data).sum().reshape(())), "mul")
    return _make(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = a.dtype.type(c)
    return _make(a.data * c, (a,), lambda g: (g * c,), "scale")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0).astype(a.dtype), (a,), lambda g: (g * mask,), "relu")


def sigmoid(a: Tensor) -> Tensor:
    s = special.expit(a.data)
    return _make(s, (a,), lambda g: (g * s * (1 - s),), "sigmoid")


def silu(a: Tensor) -> Tensor:
    s = special.expit(a.data)
    out = a.data * s
    return _make(out, (a,), lambda g: (g * (s * (1 + a.data * (1 - s))),), "silu")


_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a: Tensor) -> Tensor:
    """Exact (erf-based) GELU."""
    x = a.data
    cdf = 0.5 * (1.0 + special.erf(x * _INV_SQRT2))
    out = (x * cdf).astype(a.dtype)

    def vjp(g):
        pdf = np.exp(-0.5 * x * x) * _INV_SQRT2PI
        return ((g * (cdf + x * pdf)).astype(a.dtype),)

    return _make(out, (a,), vjp, "gelu")


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def softplus(a: Tensor) -> Tensor:
    out = np.logaddexp(a.dtype.type(0), a.data)
    return _make(out, (a,), lambda g: (g * special.expit(a.data),), "softplus")


# -- shape ops --------------------------------------------------------------
def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    return _make(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _make(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),), "transpose")


def concat(xs: Sequence[Tensor], axis: int = 1) -> Tensor:
    xs = list(xs)
    if not xs:
        raise ShapeError("concat of an empty list")
    ref = xs[0]
    for x in xs[1:]:
        _same_dtype(ref, x)
        if x.ndim != ref.ndim or any(
            s != r for i, (s, r) in enumerate(zip(x.shape, ref.shape)) if i != axis % ref.ndim
        ):
            raise ShapeError(f"cannot concat shapes {ref.shape} and {x.shape} on axis {axis}")
    sizes = [x.shape[axis] for x in xs]
    bounds = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(xs)))

    return _make(np.concatenate([x.data for x in xs], axis=axis), xs, vjp, "concat")


def split(a: Tensor, sizes: Sequence[int], axis: int = 1) -> list[Tensor]:
    """Split along ``axis`` into consecutive pieces of the given sizes."""
    if sum(sizes) != a.shape[axis]:
        raise ShapeError(f"split sizes {list(sizes)} do not sum to {a.shape[axis]}")
    out = []
    start = 0
    for size in sizes:
        idx = np.arange(start, start + size)

        def vjp(g, idx=idx):
            full = np.zeros(a.shape, dtype=a.dtype)
            sl = [slice(None)] * a.ndim
            sl[axis] = slice(idx[0], idx[-1] + 1)
            full[tuple(sl)] = g
            return (full,)

        out.append(_make(np.take(a.data, idx, axis=axis), (a,), vjp, "split"))
        start += size
    return out


def sum_(a: Tensor, axis=None) -> Tensor:
    out = np.asarray(a.data.sum(axis=axis, keepdims=True))

    def vjp(g):
        return (np.broadcast_to(g, a.shape).astype(a.dtype, copy=True),)

    res = _make(out, (a,), vjp, "sum")
    if axis is None:
        return reshape(res, ())
    return reshape(res, np.squeeze(out, axis=axis).shape)


def mean(a: Tensor, axis=None) -> Tensor:
    n = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return scale(sum_(a, axis), 1.0 / n)


# -- linear algebra ---------------------------------------------------------
def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; leading dims follow numpy batch broadcasting."""
    _same_dtype(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None

    def vjp(g):
        ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return _make(out, (a, b), vjp, "matmul")


# -- normalisation & probabilities -----------------------------------------
def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _make(y, (x,), vjp, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse

    def vjp(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _make(out, (x,), vjp, "log_softmax")


def cross_entropy(logits: Tensor, target: np.ndarray, axis: int = 1) -> Tensor:
    """Mean negative log-likelihood of integer ``target`` under softmax(logits).

    ``target`` has the shape of ``logits`` with ``axis`` removed.
    """
    target = np.asarray(target)
    expected = logits.shape[:axis] + logits.shape[axis + 1:]
    if target.shape != expected:
        raise ShapeError(f"target shape {target.shape} != {expected}")
    logp = log_softmax(logits, axis=axis)
    picked = np.take_along_axis(logp.data, np.expand_dims(target, axis), axis=axis)
    n = target.size
    out = np.asarray(-picked.sum() / n, dtype=logits.dtype)

    def vjp(g):
        full = np.zeros(logp.shape, dtype=logp.dtype)
        np.put_along_axis(full, np.expand_dims(target, axis), -g / n, axis=axis)
        return (full,)

    return _make(out, (logp,), vjp, "cross_entropy")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6, axis: int = 1) -> Tensor:
    """Normalise over ``axis`` (the channel axis for NCHW maps)."""
    c = x.shape[axis]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"gamma/beta shapes {gamma.shape}/{beta.shape} do not match {c} channels")
    _same_dtype(x, gamma)
    view = [1] * x.ndim
    view[axis] = c
    mu = x.data.mean(axis=axis, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    gv = gamma.data.reshape(view)
    out = xhat * gv + beta.data.reshape(view)
    red = tuple(i for i in range(x.ndim) if i != axis % x.ndim)

    def vjp(g):
        dxhat = g * gv
        dx = rstd * (
            dxhat
            - dxhat.mean(axis=axis, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=axis, keepdims=True)
        )
        return dx, (g * xhat).sum(axis=red), g.sum(axis=red)

    return _make(out, (x, gamma, beta), vjp, "layer_norm")


# -- token permutations -----------------------------------------------------
def _check_perms(index: np.ndarray, length: int) -> np.ndarray:
    index = np.atleast_2d(np.asarray(index, dtype=np.intp))
    expect = np.arange(length)
    for row in index:
        if row.shape != (length,) or not np.array_equal(np.sort(row), expect):
            raise ShapeError("token index rows must be permutations of the last axis")
    return index


def gather_tokens(x: Tensor, perms: np.ndarray) -> Tensor:
    """``out[..., k, t] = x[..., perms[k, t]]`` for K permutation rows."""
    perms = _check_perms(perms, x.shape[-1])
    inv = np.argsort(perms, axis=1)
    out = x.data[..., perms]

    def vjp(g):
        acc = g[..., 0, :][..., inv[0]]
        for k in range(1, len(perms)):
            acc = acc + g[..., k, :][..., inv[k]]
        return (acc,)

    return _make(out, (x,), vjp, "gather_tokens")


def scatter_tokens(y: Tensor, perms: np.ndarray) -> Tensor:
    """Undo :func:`gather_tokens` per row and sum the K restored sequences."""
    perms = _check_perms(perms, y.shape[-1])
    if y.shape[-2] != len(perms):
        raise ShapeError(f"axis -2 of {y.shape} must hold {len(perms)} orderings")
    inv = np.argsort(perms, axis=1)
    acc = y.data[..., 0, :][..., inv[0]]
    for k in range(1, len(perms)):
        acc = acc + y.data[..., k, :][..., inv[k]]

    def vjp(g):
        return (g[..., perms],)

    return _make(acc, (y,), vjp, "scatter_tokens")


def custom_op(
    data: np.ndarray, parents: Sequence[Tensor], vjp: Callable, name: str
) -> Tensor:
    """Record an externally computed result with a hand-written VJP."""
    for p in parents[1:]:
        _same_dtype(parents[0], p)
    return _make(data, tuple(parents), vjp, name)


def parameters_of(xs: Iterable[Tensor]) -> list[Tensor]:
    return [x for x in xs if x.requires_grad and x.is_leaf]
