import numpy as np
import pytest

from hybridseg import tensor as T
from hybridseg.attention import GlobalAttention
from hybridseg.errors import ConfigError, ShapeError
from hybridseg.gradcheck import grad_check
from hybridseg.harness.checks import randomize
from hybridseg.model import (
    Decoder,
    Encoder,
    LassBlock,
    ModelConfig,
    MultiScaleContextScan,
    SegmentationNet,
    count_params,
    preset,
)
from hybridseg.ssm import SS2D
from hybridseg.tensor import Tensor, no_grad


def test_block_with_zero_output_projections_is_identity():
    cfg = preset("micro")
    block = LassBlock(16, 9, 1, cfg, np.random.default_rng(0)).astype(np.float64)
    randomize(block, np.random.default_rng(1))
    for conv in (block.fuse, block.ffn.fc2):
        conv.weight.data[...] = 0
        conv.bias.data[...] = 0
    x = np.random.default_rng(2).normal(size=(1, 16, 8, 8))
    assert np.array_equal(block(Tensor(x)).data, x)


def test_block_preserves_shape():
    block = LassBlock(16, 7, 0, preset("micro"), np.random.default_rng(0)).astype(np.float32)
    assert block(Tensor(np.random.default_rng(1).normal(size=(1, 16, 8, 8)).astype(np.float32))).shape == (1, 16, 8, 8)


def test_block_gradient_check():
    cfg = preset("micro")
    rng = np.random.default_rng(3)
    block = randomize(LassBlock(4, 3, 0, cfg, rng).astype(np.float64), rng, 0.2)
    x = Tensor(rng.normal(size=(1, 4, 4, 5)))
    w = Tensor(rng.normal(size=x.shape))
    assert grad_check(lambda x, *_: T.sum_(T.mul(block(x), w)), [x, *block.parameters()]) <= 1e-4


def test_stage4_block_uses_global_attention():
    cfg = preset("micro")
    assert isinstance(LassBlock(8, 7, 3, cfg).global_mixer, GlobalAttention)
    assert isinstance(LassBlock(8, 7, 2, cfg).global_mixer, SS2D)
    assert isinstance(LassBlock(8, 7, 3, cfg.replace(stage4_global_attention=False)).global_mixer, SS2D)
    natten_only = LassBlock(8, 7, 3, cfg.replace(mixer="natten"))
    assert natten_only.global_mixer is None and natten_only.local is not None
    assert LassBlock(8, 7, 1, cfg.replace(mixer="ss2d")).local is None


def test_tiny_pyramid_shapes():
    cfg = preset("tiny")
    enc = Encoder(cfg).astype(np.float32).eval()
    with no_grad():
        pyr = enc(Tensor(np.zeros((1, 3, 64, 64), dtype=np.float32)))
    assert [f.shape for f in pyr] == [(1, 32, 16, 16), (1, 64, 8, 8), (1, 144, 4, 4), (1, 192, 2, 2)]


def test_micro_pyramid_shapes():
    enc = Encoder(preset("micro")).astype(np.float32).eval()
    with no_grad():
        pyr = enc(Tensor(np.zeros((1, 3, 32, 32), dtype=np.float32)))
    assert [f.shape for f in pyr] == [(1, 8, 8, 8), (1, 16, 4, 4), (1, 24, 2, 2), (1, 32, 1, 1)]


def test_encoder_rejects_indivisible_input():
    with pytest.raises(ShapeError):
        Encoder(preset("micro"))(Tensor(np.zeros((1, 3, 48, 32))))


def test_eval_batch_is_decomposable():
    net = SegmentationNet(preset("micro"), dtype=np.float64).eval()
    randomize(net, np.random.default_rng(0), 0.05)
    x = np.random.default_rng(1).random((2, 3, 32, 64))
    with no_grad():
        both = net(Tensor(x)).data
        parts = np.concatenate([net(Tensor(x[i:i + 1])).data for i in range(2)])
    assert np.allclose(both, parts, atol=1e-12)


def test_eval_is_deterministic():
    net = SegmentationNet(preset("micro"), seed=4).eval()
    x = np.random.default_rng(1).random((1, 3, 32, 32)).astype(np.float32)
    with no_grad():
        assert np.array_equal(net(Tensor(x)).data, net(Tensor(x)).data)
    other = SegmentationNet(preset("micro"), seed=4).eval()
    with no_grad():
        assert np.array_equal(net(Tensor(x)).data, other(Tensor(x)).data)


def micro_pyramid(seed=0, size=64):
    enc = Encoder(preset("micro"), np.random.default_rng(seed)).astype(np.float64).eval()
    with no_grad():
        return enc(Tensor(np.random.default_rng(seed + 1).random((1, 3, size, size))))


def test_aggregate_shape_and_nonnegativity():
    pyr = micro_pyramid()
    dec = Decoder(preset("micro"), np.random.default_rng(0)).astype(np.float64).eval()
    randomize(dec, np.random.default_rng(1))
    f, f2, up3, up4 = dec.aggregate(pyr)
    assert f.shape[2:] == pyr.f2.shape[2:] == up3.shape[2:] == up4.shape[2:]
    assert (f.data >= 0).all() and (f.data > 0).any()


def test_aggregate_zero_weights_is_relu_of_bn_shift():
    pyr = micro_pyramid()
    dec = Decoder(preset("micro")).astype(np.float64).eval()
    for cbr in (dec.proj2, dec.proj3, dec.proj4, dec.fuse):
        cbr.conv.weight.data[...] = 0
    beta = np.random.default_rng(2).normal(size=32)
    dec.fuse.bn.beta.data[...] = beta
    f = dec.aggregate(pyr)[0].data
    assert np.allclose(f, np.maximum(beta, 0)[None, :, None, None], atol=1e-15)


def test_context_scan_shapes():
    ctx = MultiScaleContextScan(16).astype(np.float64)
    f = Tensor(np.random.default_rng(0).normal(size=(1, 16, 16, 16)))
    assert ctx.scan_input(f).shape == (1, 48, 4, 4)
    assert ctx(f).shape == (1, 16, 16, 16)
    # a 512x512 image gives a 64x64 stride-8 map, scanned at 16x16
    assert ctx.scan_input(Tensor(np.zeros((1, 16, 64, 64)))).shape == (1, 48, 16, 16)
    with pytest.raises(ShapeError):
        ctx(Tensor(np.zeros((1, 16, 6, 8))))


def test_context_scan_bilinear_variant_shapes():
    ctx = MultiScaleContextScan(8, downsample="bilinear").astype(np.float64)
    f = Tensor(np.random.default_rng(0).normal(size=(2, 8, 8, 12)))
    assert ctx.scan_input(f).shape == (2, 24, 2, 3) and ctx(f).shape == f.shape


def test_context_scan_zero_weights_collapse_to_constant():
    rng = np.random.default_rng(0)
    ctx = randomize(MultiScaleContextScan(8).astype(np.float64), rng)
    for conv in (ctx.down2, ctx.down4, ctx.proj_s1, ctx.proj_s2, ctx.proj_s4):
        conv.weight.data[...] = 0
        conv.bias.data[...] = 0
    # the scan sees 0, its gate silu(0) = 0 zeroes it, and only the mix bias survives
    out = ctx(Tensor(rng.normal(size=(1, 8, 8, 8)))).data
    assert np.allclose(out, out[:, :, :1, :1], atol=1e-12)
    assert np.ptp(out[0, :, 0, 0]) > 0


def test_logits_shape_and_softmax():
    net = SegmentationNet(preset("micro", num_classes=4), dtype=np.float64).eval()
    randomize(net, np.random.default_rng(0), 0.05)
    with no_grad():
        out = net(Tensor(np.random.default_rng(1).random((1, 3, 64, 96))))
    assert out.shape == (1, 4, 64, 96)
    assert np.allclose(T.softmax(out, axis=1).data.sum(1), 1.0, atol=1e-12)


def test_zero_final_layer_gives_uniform_posterior():
    net = SegmentationNet(preset("micro", num_classes=3), dtype=np.float64).eval()
    net.decoder.head.fc2.weight.data[...] = 0
    net.decoder.head.fc2.bias.data[...] = 0
    with no_grad():
        p = T.softmax(net(Tensor(np.random.default_rng(0).random((1, 3, 32, 32)))), axis=1).data
    assert np.allclose(p, 1 / 3, atol=1e-15)


def test_non_multiple_of_32_is_padded_and_cropped():
    net = SegmentationNet(preset("micro")).eval()
    with no_grad():
        assert net(Tensor(np.zeros((1, 3, 48, 48), dtype=np.float32))).shape == (1, 2, 48, 48)
    with pytest.raises(ShapeError):
        net(Tensor(np.zeros((1, 4, 32, 32), dtype=np.float32)))


@pytest.mark.parametrize("variant", [
    {"mixer": "natten"}, {"mixer": "ss2d"}, {"context_scan": False},
    {"context_downsample": "bilinear"}, {"stage4_global_attention": False}, {"ssm_state": 4},
])
def test_variants_build_and_match_param_count(variant):
    cfg = preset("micro", **variant)
    net = SegmentationNet(cfg)
    assert net.num_parameters() == count_params(cfg, "all")
    with no_grad():
        assert net.eval()(Tensor(np.zeros((1, 3, 32, 32), dtype=np.float32))).shape == (1, 2, 32, 32)


def test_end_to_end_gradient_on_sampled_parameters():
    cfg = preset("micro")
    net = SegmentationNet(cfg, seed=0, dtype=np.float64)
    rng = np.random.default_rng(0)
    randomize(net, rng, 0.05)
    net.eval()   # fixed BN statistics keep the loss a smooth function of every parameter
    x = rng.random((1, 3, 32, 32))
    target = rng.integers(0, 2, size=(1, 32, 32))
    params = net.parameters()
    flat = [(i, j) for i, p in enumerate(params) for j in range(p.size)]
    pick = rng.choice(len(flat), size=max(1, len(flat) // 100), replace=False)
    indices = {i + 1: [] for i in range(len(params))}
    indices[0] = []
    for f in pick:
        i, j = flat[f]
        indices[i + 1].append(j)
    err = grad_check(
        lambda _x, *_: T.cross_entropy(net(_x), target, axis=1), [Tensor(x), *params], indices=indices
    )
    assert err <= 2e-4


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(window_sizes=[11, 9, 8, 7])
    with pytest.raises(ConfigError):
        ModelConfig(mixer="conv")
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({"stage_channels": [1, 2, 3, 4], "colour": 1})
    with pytest.raises(ConfigError):
        preset("huge")
    cfg = preset("tiny")
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg and cfg.digest() == preset("tiny").digest()
