"""Architecture configuration and named presets."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from ..errors import ConfigError

MIXERS = ("lass", "natten", "ss2d")
DOWNSAMPLERS = ("unshuffle", "bilinear")


@dataclass
class ModelConfig:
    name: str = "custom"
    stage_channels: list[int] = field(default_factory=lambda: [8, 16, 24, 32])
    stage_blocks: list[int] = field(default_factory=lambda: [1, 1, 1, 1])
    window_sizes: list[int] = field(default_factory=lambda: [11, 9, 7, 7])
    ssm_state: int = 1
    ssm_expansion: float = 1.0
    ssm_gate: bool = True
    ffn_ratio: float = 4.0
    decoder_width: int = 32
    num_classes: int = 2
    stem_channels: int | None = None  # width after the first stem conv; default C1 // 2
    mixer: str = "lass"              # lass = natten then ss2d; natten / ss2d = ablations
    stage4_global_attention: bool = True
    context_scan: bool = True        # multi-scale context scan in the decoder
    context_downsample: str = "unshuffle"

    def __post_init__(self):
        self.stage_channels = [int(c) for c in self.stage_channels]
        self.stage_blocks = [int(b) for b in self.stage_blocks]
        self.window_sizes = [int(k) for k in self.window_sizes]
        self.validate()

    def validate(self) -> None:
        for fname in ("stage_channels", "stage_blocks", "window_sizes"):
            if len(getattr(self, fname)) != 4:
                raise ConfigError(f"{fname} must have 4 entries")
        if any(c < 1 for c in self.stage_channels) or any(b < 0 for b in self.stage_blocks):
            raise ConfigError("stage channels must be positive and block counts non-negative")
        if any(k < 1 or k % 2 == 0 for k in self.window_sizes):
            raise ConfigError(f"window sizes must be odd and positive: {self.window_sizes}")
        if self.ssm_state < 1 or self.ssm_expansion <= 0 or self.ffn_ratio <= 0:
            raise ConfigError("ssm_state, ssm_expansion and ffn_ratio must be positive")
        if self.decoder_width < 1 or self.num_classes < 2:
            raise ConfigError("decoder_width must be >= 1 and num_classes >= 2")
        if self.mixer not in MIXERS:
            raise ConfigError(f"mixer must be one of {MIXERS}, got {self.mixer!r}")
        if self.context_downsample not in DOWNSAMPLERS:
            raise ConfigError(f"context_downsample must be one of {DOWNSAMPLERS}")

    @property
    def stem_width(self) -> int:
        return self.stem_channels or max(1, self.stage_channels[0] // 2)

    def uses_ss2d(self, stage: int) -> bool:
        return self.mixer in ("lass", "ss2d") and not (stage == 3 and self.stage4_global_attention)

    def uses_global_attention(self, stage: int) -> bool:
        return self.mixer in ("lass", "ss2d") and stage == 3 and self.stage4_global_attention

    def uses_natten(self) -> bool:
        return self.mixer in ("lass", "natten")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)


PRESETS = {
    "micro": dict(stage_channels=[8, 16, 24, 32], stage_blocks=[1, 1, 1, 1], decoder_width=32),
    "tiny": dict(stage_channels=[32, 64, 144, 192], stage_blocks=[2, 2, 4, 2], decoder_width=128),
    "small": dict(stage_channels=[64, 144, 288, 512], stage_blocks=[2, 2, 10, 4], decoder_width=256),
    "base": dict(stage_channels=[72, 144, 320, 576], stage_blocks=[2, 2, 22, 4], decoder_width=256),
}


def preset(name: str, **overrides) -> ModelConfig:
    try:
        base = PRESETS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return ModelConfig(name=name.lower(), **{**base, **overrides})
