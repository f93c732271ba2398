"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imports; set ``HYBRIDSEG_PURE_PYTHON=1``
to force the fallback. Both backends expose the same four functions and are
interchangeable via :func:`use_backend`.
"""

import os

import numpy as np

from . import _fallback

try:
    from . import _native
except ImportError:  # extension not built
    _native = None

BACKENDS = {"python": _fallback}
if _native is not None:
    BACKENDS["native"] = _native

_active = _fallback if os.environ.get("HYBRIDSEG_PURE_PYTHON") or _native is None else _native


def backend_name() -> str:
    return "native" if _active is _native else "python"


def available_backends() -> list[str]:
    return list(BACKENDS)


def use_backend(name: str) -> None:
    global _active
    try:
        _active = BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available_backends()}") from None


class backend:
    """Context manager that switches the kernel backend temporarily."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        self.prev = backend_name()
        use_backend(self.name)

    def __exit__(self, *exc):
        use_backend(self.prev)


def _c(a, dtype):
    return np.ascontiguousarray(a, dtype=dtype)


def scan_forward(u, delta, A, Bm, Cm, Dskip):
    """y[b,d,t] for the grouped selective scan; see :mod:`hybridseg.ssm`."""
    dt = u.dtype
    y = np.empty_like(u)
    _active.scan_forward(_c(u, dt), _c(delta, dt), _c(A, dt), _c(Bm, dt), _c(Cm, dt), _c(Dskip, dt), y)
    return y


def scan_backward(u, delta, A, Bm, Cm, Dskip, dy):
    dt = u.dtype
    du = np.empty_like(u)
    ddelta = np.empty_like(u)
    dA = np.empty(A.shape, dtype=dt)
    dB = np.empty(Bm.shape, dtype=dt)
    dC = np.empty(Cm.shape, dtype=dt)
    dD = np.empty(Dskip.shape, dtype=dt)
    _active.scan_backward(
        _c(u, dt), _c(delta, dt), _c(A, dt), _c(Bm, dt), _c(Cm, dt), _c(Dskip, dt), _c(dy, dt),
        du, ddelta, dA, dB, dC, dD,
    )
    return du, ddelta, dA, dB, dC, dD


def natten_forward(q, k, v, rpb, height, width, ksize, scale):
    """Returns (out [B,h,L,hd], attn [B,h,L,Kh*Kw])."""
    dt = q.dtype
    nb, nh, L, _ = q.shape
    nk = min(ksize, height) * min(ksize, width)
    out = np.empty_like(q)
    attn = np.empty((nb, nh, L, nk), dtype=dt)
    _active.natten_forward(
        _c(q, dt), _c(k, dt), _c(v, dt), _c(rpb, dt), height, width, ksize, float(scale), out, attn
    )
    return out, attn


def natten_backward(q, k, v, rpb, attn, dout, height, width, ksize, scale):
    dt = q.dtype
    dq = np.empty_like(q)
    dk = np.empty_like(q)
    dv = np.empty_like(q)
    drpb = np.empty(rpb.shape, dtype=dt)
    _active.natten_backward(
        _c(q, dt), _c(k, dt), _c(v, dt), _c(rpb, dt), _c(attn, dt), _c(dout, dt),
        height, width, ksize, float(scale), dq, dk, dv, drpb,
    )
    return dq, dk, dv, drpb
