from . import functional
from .layers import FFN, BatchNorm2d, Conv2d, ConvBNReLU, LayerNorm2d, ffn, hidden_width
from .module import Module, Parameter, trunc_normal

__all__ = [
    "functional",
    "FFN",
    "BatchNorm2d",
    "Conv2d",
    "ConvBNReLU",
    "LayerNorm2d",
    "ffn",
    "hidden_width",
    "Module",
    "Parameter",
    "trunc_normal",
]
