"""Linear-complexity hybrid segmentation network on a small numpy autodiff core.

The encoder mixes tokens with sliding-window neighborhood attention followed
by a four-direction selective state-space scan; the decoder adds a
multi-scale context scan at 1/32 resolution.
"""

from . import kernels
from .errors import ConfigError, GraphError, HybridSegError, NumericsError, ShapeError
from .gradcheck import grad_check
from .model import ModelConfig, SegmentationNet, count_flops, count_params, preset
from .tensor import Tensor, backward, no_grad

__version__ = "0.1.0"

__all__ = [
    "kernels",
    "ConfigError",
    "GraphError",
    "HybridSegError",
    "NumericsError",
    "ShapeError",
    "grad_check",
    "ModelConfig",
    "SegmentationNet",
    "count_flops",
    "count_params",
    "preset",
    "Tensor",
    "backward",
    "no_grad",
]
