from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..tensor import Tensor, gelu, layer_norm, relu
from . import functional as F
from .module import Module, Parameter, trunc_normal


class Conv2d(Module):
    def __init__(self, in_ch, out_ch, kernel=1, stride=1, padding=0, groups=1, bias=True, rng=None, std=0.02):
        rng = rng if rng is not None else np.random.default_rng(0)
        kh, kw = F._pair(kernel)
        if in_ch % groups or out_ch % groups:
            raise ShapeError(f"{in_ch}->{out_ch} not divisible by groups={groups}")
        self.stride, self.padding, self.groups = stride, padding, groups
        self.weight = Parameter(trunc_normal(rng, (out_ch, in_ch // groups, kh, kw), std))
        self.bias = Parameter(np.zeros(out_ch)) if bias else None

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.groups)


class BatchNorm2d(Module):
    _buffer_names = ("running_mean", "running_var")

    def __init__(self, channels, momentum=0.1, eps=1e-5):
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.momentum, self.eps = momentum, eps

    def forward(self, x: Tensor) -> Tensor:
        return F.batch_norm(
            x, self.gamma, self.beta, self.running_mean, self.running_var, self.training, self.momentum, self.eps
        )


class LayerNorm2d(Module):
    """Layer norm over the channel axis of an NCHW map."""

    def __init__(self, channels, eps=1e-6):
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta, self.eps, axis=1)


class ConvBNReLU(Module):
    """1x1 conv, batch norm, ReLU."""

    def __init__(self, in_ch, out_ch, rng=None):
        self.conv = Conv2d(in_ch, out_ch, 1, bias=False, rng=rng)
        self.bn = BatchNorm2d(out_ch)

    def forward(self, x):
        return relu(self.bn(self.conv(x)))


def hidden_width(channels: int, ratio: float) -> int:
    hidden = int(round(ratio * channels))
    if hidden < 1:
        raise ShapeError(f"hidden width {hidden} from ratio {ratio} and {channels} channels")
    return hidden


class FFN(Module):
    """Token-wise two-layer MLP (1x1 convs) with GELU in between."""

    def __init__(self, channels, hidden_ratio=4.0, out_ch=None, hidden=None, rng=None):
        hidden = hidden if hidden is not None else hidden_width(channels, hidden_ratio)
        self.fc1 = Conv2d(channels, hidden, 1, rng=rng)
        self.fc2 = Conv2d(hidden, out_ch or channels, 1, rng=rng)

    def forward(self, x):
        return self.fc2(gelu(self.fc1(x)))


def ffn(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Tensor:
    """Functional FFN with 1x1 weights [hidden, C, 1, 1] and [out, hidden, 1, 1]."""
    return F.conv2d(gelu(F.conv2d(x, w1, b1)), w2, b2)
