from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..nn import functional as F
from ..nn.module import Module
from ..tensor import Tensor
from .config import ModelConfig
from .decoder import Decoder
from .encoder import Encoder


class SegmentationNet(Module):
    """Encoder + decoder producing per-pixel class logits.

    Inputs whose sides are not multiples of 32 are zero-padded at the bottom
    and right; logits are cropped back to the input size.
    """

    def __init__(self, cfg: ModelConfig, seed: int = 0, dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.encoder = Encoder(cfg, rng)
        self.decoder = Decoder(cfg, rng)
        self.astype(dtype)

    @property
    def dtype(self):
        return self.encoder.stages[0].entry.conv1.weight.dtype

    def forward(self, img: Tensor) -> Tensor:
        if img.ndim != 4 or img.shape[1] != 3:
            raise ShapeError(f"expected [B, 3, H, W] images, got {img.shape}")
        h, w = img.shape[2:]
        ph, pw = -h % 32, -w % 32
        x = F.pad_bottom_right(img, ph, pw)
        pyr = self.encoder(x)
        logits = self.decoder(pyr, h + ph, w + pw)
        return F.crop(logits, h, w)

    def predict(self, img: np.ndarray) -> np.ndarray:
        from ..tensor import no_grad

        with no_grad():
            logits = self(Tensor(np.asarray(img, dtype=self.dtype)))
        return logits.data.argmax(axis=1)
