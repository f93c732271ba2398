import re
from pathlib import Path

import numpy as np

from hybridseg.model import SegmentationNet, count_flops, count_params, natten_flops, preset, scan_flops
from hybridseg.model.accounting import conv_flops, conv_params, decoder_param_table, encoder_param_table
from hybridseg.model.encoder import Encoder
from hybridseg.nn.layers import Conv2d

LEDGER = Path(__file__).resolve().parents[1] / "docs" / "micro_param_ledger.md"


def test_single_pointwise_conv():
    assert conv_params(4, 8) == 40
    assert Conv2d(4, 8).num_parameters() == 40


def test_closed_form_attention_and_scan_terms():
    assert natten_flops(56 * 56, 32, 11) == 3 * 3136 * 1024 + 2 * 3136 * 32 * 121 == 33_918_976
    assert scan_flops(3136, 32, 1) == 4 * 4 * 3136 * 32 == 1_605_632


def test_tiny_bands():
    cfg = preset("tiny")
    assert 2.8e6 <= count_params(cfg) <= 4.2e6
    assert 0.52e9 <= count_flops(cfg, 224, 224).total <= 0.78e9


def test_closed_form_matches_built_modules():
    for name in ("micro", "tiny"):
        cfg = preset(name)
        assert Encoder(cfg).num_parameters() == count_params(cfg, "encoder")
    net = SegmentationNet(preset("micro"))
    assert net.num_parameters() == count_params(preset("micro"), "all")
    assert net.encoder.num_parameters() == sum(encoder_param_table(preset("micro")).values())
    assert net.decoder.num_parameters() == sum(decoder_param_table(preset("micro")).values())


def ledger_numbers():
    text = LEDGER.read_text()
    bold = {m.group(1).strip(): int(m.group(2).replace(",", ""))
            for m in re.finditer(r"\*\*([a-z0-9 ]+)\*\* \|[^|]*\| \*\*([\d,]+)\*\*", text)}
    total = int(re.search(r"\*\*Total: ([\d,]+)\*\*", text).group(1).replace(",", ""))
    return bold, total


def test_micro_matches_hand_ledger():
    bold, total = ledger_numbers()
    enc, dec = encoder_param_table(preset("micro")), decoder_param_table(preset("micro"))
    assert bold["stem"] == enc["stem"]
    for i in range(1, 5):
        assert bold[f"stage {i}"] == enc[f"stage{i}"]
    assert bold["aggregation"] == dec["aggregate"] and bold["context scan"] == dec["context"]
    assert bold["encoder"] == count_params(preset("micro"), "encoder")
    assert bold["decoder"] == count_params(preset("micro"), "decoder")
    assert total == bold["encoder"] + bold["decoder"] == count_params(preset("micro"), "all")


def test_flops_scale_linearly_without_global_attention():
    cfg = preset("tiny", stage4_global_attention=False)
    a, b = count_flops(cfg, 224, 224).total, count_flops(cfg, 448, 448).total
    assert 3.9 < b / a <= 4.0   # windows clamp at small maps, so slightly under 4x


def test_conv_flops_convention():
    assert conv_flops(3, 16, 3, 112, 112) == 16 * 3 * 9 * 112 * 112
    assert conv_flops(8, 8, 3, 4, 4, groups=8) == 8 * 9 * 16


def test_flop_terms_present():
    terms = count_flops(preset("tiny"), 224, 224).terms
    assert {"conv", "natten", "scan", "ffn", "global_attention"} <= set(terms)
    assert count_flops(preset("tiny"), 224, 224, "all").total > count_flops(preset("tiny"), 224, 224).total
    assert np.isclose(count_params(preset("small")) / 1e6, 34.36, atol=0.01)
