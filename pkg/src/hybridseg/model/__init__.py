from .accounting import FlopsModel, count_flops, count_params, natten_flops, scan_flops
from .config import PRESETS, ModelConfig, preset
from .decoder import Decoder, MultiScaleContextScan, decoder_aggregate, mmscope
from .encoder import Encoder, FeaturePyramid, LassBlock, encoder_forward, lass_block
from .net import SegmentationNet

__all__ = [
    "FlopsModel",
    "count_flops",
    "count_params",
    "natten_flops",
    "scan_flops",
    "PRESETS",
    "ModelConfig",
    "preset",
    "Decoder",
    "MultiScaleContextScan",
    "decoder_aggregate",
    "mmscope",
    "Encoder",
    "FeaturePyramid",
    "LassBlock",
    "encoder_forward",
    "lass_block",
    "SegmentationNet",
]
