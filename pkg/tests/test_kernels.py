import numpy as np
import pytest

from hybridseg import kernels

pytestmark = pytest.mark.skipif(
    "native" not in kernels.available_backends(), reason="compiled extension not built"
)


def both(fn):
    out = {}
    for name in ("python", "native"):
        with kernels.backend(name):
            out[name] = fn()
    return out["python"], out["native"]


@pytest.mark.parametrize("dtype,tol", [(np.float64, 1e-12), (np.float32, 1e-4)])
def test_scan_backends_agree(dtype, tol):
    rng = np.random.default_rng(0)
    b, d, n, L, g = 2, 6, 3, 9, 2
    u = rng.normal(size=(b, d, L)).astype(dtype)
    delta = rng.uniform(0.05, 1.0, size=(b, d, L)).astype(dtype)
    A = -rng.uniform(0.2, 2.0, size=(d, n)).astype(dtype)
    Bm, Cm = (rng.normal(size=(b, g, n, L)).astype(dtype) for _ in range(2))
    D = rng.normal(size=d).astype(dtype)
    dy = rng.normal(size=(b, d, L)).astype(dtype)
    py, nat = both(lambda: kernels.scan_forward(u, delta, A, Bm, Cm, D))
    assert py.dtype == nat.dtype == dtype
    assert np.allclose(py, nat, atol=tol, rtol=tol)
    py, nat = both(lambda: kernels.scan_backward(u, delta, A, Bm, Cm, D, dy))
    for a, b_ in zip(py, nat):
        assert a.shape == b_.shape and np.allclose(a, b_, atol=tol * 10, rtol=tol)


@pytest.mark.parametrize("hw,k", [((5, 7), 3), ((4, 4), 5), ((1, 3), 3), ((8, 6), 7)])
def test_natten_backends_agree(hw, k):
    rng = np.random.default_rng(1)
    h, w = hw
    q, kk, v = (rng.normal(size=(2, 2, h * w, 3)) for _ in range(3))
    rpb = rng.normal(size=(2, 2 * k - 1, 2 * k - 1))
    scale = 3 ** -0.5
    (po, pa), (no, na) = both(lambda: kernels.natten_forward(q, kk, v, rpb, h, w, k, scale))
    assert np.allclose(po, no, atol=1e-12) and np.allclose(pa, na, atol=1e-12)
    dout = rng.normal(size=po.shape)
    py, nat = both(lambda: kernels.natten_backward(q, kk, v, rpb, pa, dout, h, w, k, scale))
    for a, b in zip(py, nat):
        assert np.allclose(a, b, atol=1e-12)


def test_backend_switching():
    before = kernels.backend_name()
    with kernels.backend("python"):
        assert kernels.backend_name() == "python"
    assert kernels.backend_name() == before
    with pytest.raises(ValueError):
        kernels.use_backend("gpu")
