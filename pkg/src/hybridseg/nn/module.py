"""Parameter containers."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from ..errors import ShapeError
from ..tensor import Tensor


def Parameter(data, dtype=np.float64) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=True)


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Normal(0, std) truncated to +-2 std by resampling."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out


class Module:
    """Tree of parameters and sub-modules discovered from instance attributes.

    Tensor attributes with ``requires_grad`` are parameters; names listed in
    ``_buffer_names`` are non-learnable numpy state saved with checkpoints.
    Lists of modules are traversed with their index as the path component.
    """

    _buffer_names: tuple[str, ...] = ()
    training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def children(self) -> Iterator[tuple[str, "Module"]]:
        for name, val in vars(self).items():
            if isinstance(val, Module):
                yield name, val
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, child in self.children():
            yield from child.modules()

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                yield prefix + name, val
        for name, child in self.children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for name in self._buffer_names:
            yield prefix + name, getattr(self, name)
        for name, child in self.children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def parameter_table(self) -> dict[str, int]:
        """Learnable scalar count per top-level child (plus own tensors)."""
        table: dict[str, int] = {}
        for name, p in self.named_parameters():
            key = name.split(".")[0]
            table[key] = table.get(key, 0) + p.size
        return table

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {f"param:{n}": p.data.copy() for n, p in self.named_parameters()}
        state.update({f"buffer:{n}": np.array(b, copy=True) for n, b in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        expected = {f"param:{n}" for n in params} | {f"buffer:{n}" for n in buffers}
        if set(state) != expected:
            missing = sorted(expected - set(state))[:5]
            extra = sorted(set(state) - expected)[:5]
            raise ShapeError(f"state mismatch; missing {missing}, unexpected {extra}")
        for n, p in params.items():
            arr = state[f"param:{n}"]
            if arr.shape != p.shape:
                raise ShapeError(f"{n}: stored {arr.shape}, model {p.shape}")
            p.data = np.ascontiguousarray(arr, dtype=p.dtype)
        for n, b in buffers.items():
            b[...] = state[f"buffer:{n}"]

    def astype(self, dtype) -> "Module":
        """Convert every parameter and buffer in place."""
        for m in self.modules():
            for name, val in vars(m).items():
                if isinstance(val, Tensor):
                    val.data = np.ascontiguousarray(val.data, dtype=dtype)
                    val.grad = None
            for name in m._buffer_names:
                setattr(m, name, np.asarray(getattr(m, name), dtype=dtype).copy())
        return self

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None
