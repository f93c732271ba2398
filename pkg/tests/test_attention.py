import numpy as np
import pytest

from hybridseg import tensor as T
from hybridseg.attention import (
    GlobalAttention,
    NeighborhoodAttention,
    global_attention_oracle,
    natten_oracle,
)
from hybridseg.errors import ConfigError
from hybridseg.harness.checks import natten_locality, natten_oracle_errors, random_natten
from hybridseg.tensor import Tensor


def proj_of(layer, v):
    """out_proj applied to a per-channel vector v."""
    return layer.proj.weight.data[:, :, 0, 0] @ v + layer.proj.bias.data


def test_single_pixel_any_window():
    rng = np.random.default_rng(0)
    for k in (1, 3, 7, 11):
        layer = random_natten(rng, 4, k, 2)
        x = rng.normal(size=(1, 4, 1, 1))
        v = (layer.qkv.weight.data[8:, :, 0, 0] @ x[0, :, 0, 0]) + layer.qkv.bias.data[8:]
        assert np.allclose(layer(Tensor(x)).data[0, :, 0, 0], proj_of(layer, v), atol=1e-12)
        assert np.allclose(layer.attention_weights(Tensor(x)), 1.0)


def test_constant_values_give_constant_map():
    rng = np.random.default_rng(1)
    layer = random_natten(rng, 4, 3, 2)
    layer.rpb.data[...] = 0.0
    layer.qkv.weight.data[8:] = 0.0   # v = bias only, identical at every position
    out = layer(Tensor(rng.normal(size=(1, 4, 5, 6)))).data
    want = proj_of(layer, layer.qkv.bias.data[8:])
    assert np.allclose(out, want[None, :, None, None], atol=1e-12)


def test_window_covering_small_map_matches_oracle():
    rng = np.random.default_rng(2)
    layer = random_natten(rng, 4, 5, 2)
    x = rng.normal(size=(1, 4, 3, 3))
    assert np.abs(layer(Tensor(x)).data - natten_oracle(x, layer)).max() <= 1e-5


def test_oracle_mutual_check_5x5():
    rng = np.random.default_rng(3)
    layer = random_natten(rng, 4, 3, 2)
    x = rng.normal(size=(1, 4, 5, 5))
    assert np.abs(layer(Tensor(x)).data - natten_oracle(x, layer)).max() <= 1e-5


def test_random_instances_match_oracle():
    assert max(natten_oracle_errors(instances=40, seed=9)) <= 1e-5


def test_full_window_without_bias_is_global_attention():
    rng = np.random.default_rng(4)
    nat = random_natten(rng, 4, 7, 2)
    nat.rpb.data[...] = 0.0
    glob = GlobalAttention(4, 2).astype(np.float64)
    glob.qkv, glob.proj = nat.qkv, nat.proj
    x = rng.normal(size=(2, 4, 4, 3))
    assert np.allclose(nat(Tensor(x)).data, glob(Tensor(x)).data, atol=1e-12)


def test_attention_weights_are_distributions():
    rng = np.random.default_rng(5)
    layer = random_natten(rng, 4, 5, 2)
    w = layer.attention_weights(Tensor(rng.normal(size=(2, 4, 6, 7))))
    assert (w >= 0).all() and np.allclose(w.sum(-1), 1.0, atol=1e-12)


def test_gradient_locality():
    ok, detail = natten_locality(seed=3, trials=10)
    assert ok, detail


def test_even_window_rejected():
    with pytest.raises(ConfigError):
        NeighborhoodAttention(4, 4)
    with pytest.raises(ConfigError):
        NeighborhoodAttention(4, 0)


def test_translation_equivariance_in_interior():
    rng = np.random.default_rng(6)
    layer = random_natten(rng, 4, 3, 1)
    x = rng.normal(size=(1, 4, 9, 9))
    shifted = np.roll(x, 1, axis=3)
    a = layer(Tensor(x)).data
    b = layer(Tensor(shifted)).data
    # interior queries whose windows are unaffected by the shift or the border
    assert np.allclose(b[..., 2:7, 3:8], a[..., 2:7, 2:7], atol=1e-12)


def random_global(rng, c=8, heads=2):
    layer = GlobalAttention(c, heads, rng=rng).astype(np.float64)
    for p in layer.parameters():
        p.data[...] = rng.normal(0, 0.5, p.shape)
    return layer


def test_global_single_token():
    rng = np.random.default_rng(0)
    layer = random_global(rng)
    x = rng.normal(size=(1, 8, 1, 1))
    v = layer.qkv.weight.data[16:, :, 0, 0] @ x[0, :, 0, 0] + layer.qkv.bias.data[16:]
    assert np.allclose(layer(Tensor(x)).data[0, :, 0, 0], proj_of(layer, v), atol=1e-12)


def test_global_zero_queries_average_values():
    rng = np.random.default_rng(1)
    layer = random_global(rng)
    layer.qkv.weight.data[:8] = 0.0
    layer.qkv.bias.data[:8] = 0.0
    x = rng.normal(size=(1, 8, 3, 2))
    v = np.einsum("oc,chw->ohw", layer.qkv.weight.data[16:, :, 0, 0], x[0]) + layer.qkv.bias.data[16:, None, None]
    want = proj_of(layer, v.mean(axis=(1, 2)))
    assert np.allclose(layer(Tensor(x)).data[0], want[:, None, None], atol=1e-12)


def test_global_matches_loop_oracle():
    rng = np.random.default_rng(2)
    layer = random_global(rng)
    x = rng.normal(size=(1, 8, 3, 3))
    assert np.abs(layer(Tensor(x)).data - global_attention_oracle(x, layer)).max() <= 1e-6


def test_global_attention_gradient_support_is_full():
    rng = np.random.default_rng(3)
    layer = random_global(rng)
    x = Tensor(rng.normal(size=(1, 8, 4, 4)), requires_grad=True)
    out = layer(x)
    seed = np.zeros(out.shape)
    seed[0, :, 0, 0] = 1.0
    T.backward(out, seed)
    assert (np.abs(x.grad[0]).sum(0) > 0).all()
