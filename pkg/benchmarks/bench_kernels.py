"""Compare the compiled and numpy kernel backends on the scan and window-attention hot loops.

    python3 benchmarks/bench_kernels.py [--reps 5]
"""

import argparse
import time

import numpy as np

from hybridseg import kernels


def timed(fn, reps):
    fn()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def scan_case(rng, b=1, d=128, n=1, L=4096, dtype=np.float32):
    u = rng.normal(size=(b, d, L)).astype(dtype)
    delta = rng.uniform(0.01, 0.5, size=(b, d, L)).astype(dtype)
    A = -rng.uniform(0.5, 2.0, size=(d, n)).astype(dtype)
    Bm = rng.normal(size=(b, 4, n, L)).astype(dtype)
    Cm = rng.normal(size=(b, 4, n, L)).astype(dtype)
    D = np.ones(d, dtype=dtype)
    dy = rng.normal(size=(b, d, L)).astype(dtype)
    fwd = lambda: kernels.scan_forward(u, delta, A, Bm, Cm, D)  # noqa: E731
    bwd = lambda: kernels.scan_backward(u, delta, A, Bm, Cm, D, dy)  # noqa: E731
    return fwd, bwd


def natten_case(rng, heads=1, hd=32, side=64, k=7, dtype=np.float32):
    L = side * side
    q, kk, v = (rng.normal(size=(1, heads, L, hd)).astype(dtype) for _ in range(3))
    rpb = rng.normal(size=(heads, 2 * k - 1, 2 * k - 1)).astype(dtype)
    scale = hd ** -0.5
    _, attn = kernels.natten_forward(q, kk, v, rpb, side, side, k, scale)
    dout = rng.normal(size=q.shape).astype(dtype)
    fwd = lambda: kernels.natten_forward(q, kk, v, rpb, side, side, k, scale)  # noqa: E731
    bwd = lambda: kernels.natten_backward(q, kk, v, rpb, attn, dout, side, side, k, scale)  # noqa: E731
    return fwd, bwd


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends) + "   speedup")
    for name, make in [("scan D=128 L=4096", scan_case), ("natten 64x64 K=7", natten_case)]:
        for phase in (0, 1):
            row = []
            for b in backends:
                with kernels.backend(b):
                    fns = make(np.random.default_rng(0))
                    row.append(timed(fns[phase], args.reps))
            label = f"{name} {'fwd' if phase == 0 else 'bwd'}"
            speed = f"{row[0] / row[-1]:8.1f}x" if len(row) > 1 else ""
            print(f"{label:<22}" + "".join(f"{t * 1e3:10.2f}ms" for t in row) + f"  {speed}")


if __name__ == "__main__":
    main()
