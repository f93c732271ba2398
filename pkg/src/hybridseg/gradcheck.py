"""Central finite-difference gradient checker."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import NumericsError
from .tensor import Tensor, backward


def grad_check(
    f: Callable[..., Tensor],
    inputs: Tensor | Sequence[Tensor],
    h: float | None = None,
    indices: dict[int, np.ndarray] | None = None,
) -> float:
    """Max relative error between backprop and central differences.

    ``f(*inputs)`` must return a scalar tensor. Inputs are perturbed in place
    and restored. The step per coordinate is ``h * max(1, |x_i|)`` with
    ``h = 1e-4`` by default. ``indices`` optionally maps input position to the
    flat coordinates to probe (the rest are skipped).

    Error per coordinate: ``|a - n| / max(1, |a|, |n|)``.
    """
    if isinstance(inputs, Tensor):
        inputs = [inputs]
    inputs = list(inputs)
    h = 1e-4 if h is None else h
    for x in inputs:
        x.grad = None
        x.requires_grad = True
    out = f(*inputs)
    backward(out)
    analytic = [np.zeros(x.shape, dtype=x.dtype) if x.grad is None else x.grad.copy() for x in inputs]

    worst = 0.0
    for pos, x in enumerate(inputs):
        flat = x.data.reshape(-1)
        coords = range(flat.size) if indices is None or pos not in indices else indices[pos]
        ga = analytic[pos].reshape(-1)
        for i in coords:
            orig = flat[i]
            step = h * max(1.0, abs(float(orig)))
            flat[i] = orig + step
            fp = float(f(*inputs).data)
            flat[i] = orig - step
            fm = float(f(*inputs).data)
            flat[i] = orig
            num = (fp - fm) / (2 * step)
            if not np.isfinite(num):
                raise NumericsError(f"non-finite finite difference at input {pos}, coordinate {i}")
            a = float(ga[i])
            worst = max(worst, abs(a - num) / max(1.0, abs(a), abs(num)))
    for x in inputs:
        x.grad = None
    return worst
