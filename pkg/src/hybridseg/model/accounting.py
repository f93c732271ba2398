"""Closed-form parameter and FLOP counts.

Counts are derived from the configuration alone (no model is built), so
they double as an independent check on the constructed modules.

FLOPs follow the multiply-accumulate convention used by the published
complexity figures: a dense layer mapping D to D' channels over L tokens
costs ``L * D * D'``. Neighborhood attention costs ``3LD^2 + 2LDK^2`` (qkv
projection plus the two window products) and the four-direction scan core
``4 * (3LDN + LDN)``. Norms, activations and elementwise adds are not
counted.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from ..attention import default_heads
from ..errors import ShapeError
from ..nn.layers import hidden_width
from ..ssm import default_dt_rank
from .config import ModelConfig


# -- parameters ---------------------------------------------------------------
def conv_params(cin, cout, k=1, groups=1, bias=True) -> int:
    return cout * (cin // groups) * k * k + (cout if bias else 0)


def natten_params(c, k) -> int:
    return conv_params(c, 3 * c) + conv_params(c, c) + default_heads(c) * (2 * k - 1) ** 2


def global_attention_params(c) -> int:
    return conv_params(c, 3 * c) + conv_params(c, c)


def ss2d_params(c, state=1, expansion=1.0, gate=True) -> int:
    inner = int(round(expansion * c))
    r = default_dt_rank(inner)
    return (
        conv_params(c, (2 if gate else 1) * inner, bias=False)
        + conv_params(inner, inner, 3, groups=inner)
        + 4 * (r + 2 * state) * inner      # x_proj
        + 4 * inner * r + 4 * inner        # dt_proj + bias
        + 4 * inner * state + 4 * inner    # A_log + D
        + 2 * inner                        # out_norm
        + conv_params(inner, c, bias=False)
    )


def ffn_params(c, ratio=4.0, out=None, hidden=None) -> int:
    hidden = hidden if hidden is not None else hidden_width(c, ratio)
    return conv_params(c, hidden) + conv_params(hidden, out or c)


def block_params(c, k, stage, cfg: ModelConfig) -> int:
    n = 2 * c + conv_params(c, c) + 2 * c + ffn_params(c, cfg.ffn_ratio)
    if cfg.uses_natten():
        n += natten_params(c, k)
    if cfg.uses_global_attention(stage):
        n += global_attention_params(c)
    elif cfg.uses_ss2d(stage):
        n += ss2d_params(c, cfg.ssm_state, cfg.ssm_expansion, cfg.ssm_gate)
    return n


def encoder_param_table(cfg: ModelConfig) -> dict[str, int]:
    c = cfg.stage_channels
    m = cfg.stem_width
    table = {"stem": conv_params(3, m, 3) + 2 * m + conv_params(m, c[0], 3)}
    for i in range(4):
        entry = 0 if i == 0 else conv_params(c[i - 1], c[i], 3) + 2 * c[i]
        blocks = cfg.stage_blocks[i] * block_params(c[i], cfg.window_sizes[i], i, cfg)
        table[f"stage{i + 1}"] = entry + blocks
    return table


def decoder_param_table(cfg: ModelConfig) -> dict[str, int]:
    cd = cfg.decoder_width
    cbr = lambda cin: conv_params(cin, cd, bias=False) + 2 * cd  # noqa: E731
    table = {
        "aggregate": sum(cbr(ci) for ci in cfg.stage_channels[1:]) + cbr(3 * cd),
        "head": ffn_params(5 * cd, out=cfg.num_classes, hidden=cd),
    }
    if cfg.context_scan:
        lossless = cfg.context_downsample == "unshuffle"
        table["context"] = (
            conv_params(cd, cd, 3)
            + conv_params(cd, cd, 5)
            + conv_params(16 * cd if lossless else cd, cd)
            + conv_params(4 * cd if lossless else cd, cd)
            + conv_params(cd, cd)
            + ss2d_params(3 * cd, cfg.ssm_state, cfg.ssm_expansion, cfg.ssm_gate)
            + conv_params(3 * cd, 3 * cd)
            + conv_params(3 * cd, cd)
        )
    return table


def count_params(cfg: ModelConfig, part: str = "encoder") -> int:
    """Learnable scalars in ``part`` ('encoder', 'decoder' or 'all')."""
    if part == "encoder":
        return sum(encoder_param_table(cfg).values())
    if part == "decoder":
        return sum(decoder_param_table(cfg).values())
    if part == "all":
        return count_params(cfg, "encoder") + count_params(cfg, "decoder")
    raise ValueError(f"unknown part {part!r}")


# -- FLOPs --------------------------------------------------------------------
@dataclass
class FlopsModel:
    terms: dict[str, int] = field(default_factory=lambda: defaultdict(int))

    def add(self, kind: str, n: int) -> None:
        self.terms[kind] += int(n)

    @property
    def total(self) -> int:
        return sum(self.terms.values())

    def merge(self, other: "FlopsModel") -> "FlopsModel":
        for k, v in other.terms.items():
            self.add(k, v)
        return self


def natten_flops(L: int, D: int, K: int) -> int:
    return 3 * L * D * D + 2 * L * D * K * K


def scan_flops(L: int, D: int, N: int) -> int:
    """Scan core for one direction set (4 directions of 3LDN + LDN)."""
    return 4 * (3 * L * D * N + L * D * N)


def conv_flops(cin, cout, k, h_out, w_out, groups=1) -> int:
    return cout * (cin // groups) * k * k * h_out * w_out


def _ss2d_flops(fm: FlopsModel, c, h, w, state, expansion, gate):
    L = h * w
    inner = int(round(expansion * c))
    r = default_dt_rank(inner)
    fm.add("conv", conv_flops(c, (2 if gate else 1) * inner, 1, h, w))
    fm.add("conv", conv_flops(inner, inner, 3, h, w, groups=inner))
    fm.add("ssm_proj", 4 * L * inner * (r + 2 * state) + 4 * L * r * inner)
    fm.add("scan", scan_flops(L, inner, state))
    fm.add("conv", conv_flops(inner, c, 1, h, w))


def _block_flops(fm: FlopsModel, c, k, h, w, stage, cfg: ModelConfig):
    L = h * w
    if cfg.uses_natten():
        # clamped windows never exceed the map; equals natten_flops when k <= h, w
        fm.add("natten", 3 * L * c * c + 2 * L * c * min(k, h) * min(k, w))
        fm.add("conv", conv_flops(c, c, 1, h, w))
    if cfg.uses_global_attention(stage):
        fm.add("global_attention", 3 * L * c * c + 2 * L * L * c)
        fm.add("conv", conv_flops(c, c, 1, h, w))
    elif cfg.uses_ss2d(stage):
        _ss2d_flops(fm, c, h, w, cfg.ssm_state, cfg.ssm_expansion, cfg.ssm_gate)
    fm.add("conv", conv_flops(c, c, 1, h, w))
    hidden = hidden_width(c, cfg.ffn_ratio)
    fm.add("ffn", 2 * L * c * hidden)


def encoder_flops(cfg: ModelConfig, height: int, width: int) -> FlopsModel:
    if height % 32 or width % 32:
        raise ShapeError(f"input {height}x{width} must be divisible by 32")
    fm = FlopsModel()
    c = cfg.stage_channels
    m = cfg.stem_width
    fm.add("conv", conv_flops(3, m, 3, height // 2, width // 2))
    fm.add("conv", conv_flops(m, c[0], 3, height // 4, width // 4))
    for i in range(4):
        h, w = height >> (i + 2), width >> (i + 2)
        if i:
            fm.add("conv", conv_flops(c[i - 1], c[i], 3, h, w))
        for _ in range(cfg.stage_blocks[i]):
            _block_flops(fm, c[i], cfg.window_sizes[i], h, w, i, cfg)
    return fm


def decoder_flops(cfg: ModelConfig, height: int, width: int) -> FlopsModel:
    fm = FlopsModel()
    cd = cfg.decoder_width
    h8, w8 = height // 8, width // 8
    c2, c3, c4 = cfg.stage_channels[1:]
    fm.add("conv", conv_flops(c2, cd, 1, h8, w8))
    fm.add("conv", conv_flops(c3, cd, 1, h8 // 2, w8 // 2))
    fm.add("conv", conv_flops(c4, cd, 1, h8 // 4, w8 // 4))
    fm.add("conv", conv_flops(3 * cd, cd, 1, h8, w8))
    if cfg.context_scan:
        h32, w32 = h8 // 4, w8 // 4
        lossless = cfg.context_downsample == "unshuffle"
        fm.add("conv", conv_flops(cd, cd, 3, h8 // 2, w8 // 2))
        fm.add("conv", conv_flops(cd, cd, 5, h32, w32))
        fm.add("conv", conv_flops(16 * cd if lossless else cd, cd, 1, h32, w32))
        fm.add("conv", conv_flops(4 * cd if lossless else cd, cd, 1, h32, w32))
        fm.add("conv", conv_flops(cd, cd, 1, h32, w32))
        _ss2d_flops(fm, 3 * cd, h32, w32, cfg.ssm_state, cfg.ssm_expansion, cfg.ssm_gate)
        fm.add("conv", conv_flops(3 * cd, 3 * cd, 1, h32, w32))
        fm.add("conv", conv_flops(3 * cd, cd, 1, h8, w8))
    fm.add("conv", conv_flops(5 * cd, cd, 1, h8, w8) + conv_flops(cd, cfg.num_classes, 1, h8, w8))
    return fm


def count_flops(cfg: ModelConfig, height: int, width: int, part: str = "encoder") -> FlopsModel:
    if part == "encoder":
        return encoder_flops(cfg, height, width)
    if part == "decoder":
        return decoder_flops(cfg, height, width)
    if part == "all":
        return encoder_flops(cfg, height, width).merge(decoder_flops(cfg, height, width))
    raise ValueError(f"unknown part {part!r}")
