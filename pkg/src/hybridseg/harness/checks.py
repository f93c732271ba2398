"""Verification suites: brute-force oracles, gradient checks, shape laws, file I/O.

Each suite returns a list of :class:`CheckResult`; failures are reported,
never raised.
"""

from __future__ import annotations

import csv
import io
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .. import tensor as T
from ..attention import GlobalAttention, NeighborhoodAttention, global_attention_oracle, natten_core, natten_oracle
from ..gradcheck import grad_check
from ..model.config import ModelConfig, preset
from ..model.decoder import MultiScaleContextScan
from ..model.encoder import Encoder, LassBlock
from ..model.net import SegmentationNet
from ..nn import functional as F
from ..nn.layers import FFN
from ..ssm import SS2D, SsmParams, selective_scan, selective_scan_1d, selective_scan_ref
from ..tensor import Tensor
from ..tensorio import (
    decode_smt1,
    encode_smt1,
    load_checkpoint,
    read_pgm,
    read_ppm,
    save_checkpoint,
    write_pgm,
    write_ppm,
)

SCAN_TOL = 1e-6
NATTEN_TOL = 1e-5
CONV_TOL = 1e-10
OP_GRAD_TOL = 1e-4
BLOCK_GRAD_TOL = 2e-4


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  {self.detail} ({self.seconds:.2f}s)"


def _run(name: str, fn: Callable[[], tuple[bool, str]]) -> CheckResult:
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # reported, not raised
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return CheckResult(name, bool(ok), detail, time.perf_counter() - t0)


# -- oracles ------------------------------------------------------------------
def random_ssm_params(rng, channels: int, state: int, dt_rank: int | None = None) -> SsmParams:
    """Scan parameters with every component randomised (not just the init law)."""
    r = dt_rank or int(rng.integers(1, 4))
    p = SsmParams.init(channels, state, r, rng)
    p.A_log.data[...] = rng.uniform(-2.0, 1.0, (channels, state))
    p.x_proj.data[...] = rng.normal(0, 0.5, p.x_proj.shape)
    p.dt_proj.data[...] = rng.normal(0, 0.5, p.dt_proj.shape)
    p.dt_bias.data[...] = rng.normal(-1.0, 0.5, channels)
    p.D_skip.data[...] = rng.normal(0, 1.0, channels)
    return p


def scan_oracle_errors(instances: int = 200, seed: int = 0) -> list[float]:
    """Relative error ``max|y - y_ref| / max|y_ref|`` per random instance."""
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(instances):
        b, d, l, n = (int(v) for v in rng.integers(1, 9, size=4))
        p = random_ssm_params(rng, d, n)
        u = rng.normal(size=(b, d, l))
        y = selective_scan_1d(Tensor(u), p).data
        ref = selective_scan_ref(u, p)
        errs.append(float(np.abs(y - ref).max() / max(np.abs(ref).max(), 1e-300)))
    return errs


def random_natten(rng, channels: int, window: int, heads: int) -> NeighborhoodAttention:
    layer = NeighborhoodAttention(channels, window, heads, rng=rng).astype(np.float64)
    layer.qkv.weight.data[...] = rng.normal(0, 0.5, layer.qkv.weight.shape)
    layer.qkv.bias.data[...] = rng.normal(0, 0.1, layer.qkv.bias.shape)
    layer.proj.weight.data[...] = rng.normal(0, 0.5, layer.proj.weight.shape)
    layer.rpb.data[...] = rng.normal(0, 0.5, layer.rpb.shape)
    return layer


def natten_oracle_errors(instances: int = 100, seed: int = 0) -> list[float]:
    """Max abs error vs masked full attention, H, W <= 7 and K in {3, 5}."""
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(instances):
        heads = int(rng.integers(1, 3))
        c = heads * int(rng.integers(1, 5))
        h, w = (int(v) for v in rng.integers(1, 8, size=2))
        k = int(rng.choice([3, 5]))
        layer = random_natten(rng, c, k, heads)
        x = rng.normal(size=(int(rng.integers(1, 3)), c, h, w))
        errs.append(float(np.abs(layer(Tensor(x)).data - natten_oracle(x, layer)).max()))
    return errs


def natten_window(i: int, n: int, k: int) -> tuple[int, int]:
    """Clamped window [lo, hi) along one axis, written independently of the kernels."""
    span = min(k, n)
    lo = min(max(i - k // 2, 0), n - span)
    return lo, lo + span


def natten_locality(seed: int = 0, trials: int = 20) -> tuple[bool, str]:
    """Gradient of one output pixel is exactly zero outside its clamped window."""
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        k = int(rng.choice([3, 5]))
        h, w = (int(v) for v in rng.integers(k, 10, size=2))
        layer = random_natten(rng, 4, k, 2)
        x = Tensor(rng.normal(size=(1, 4, h, w)), requires_grad=True)
        out = layer(x)
        i, j = int(rng.integers(h)), int(rng.integers(w))
        seed_grad = np.zeros(out.shape)
        seed_grad[0, :, i, j] = rng.normal(size=4)
        T.backward(out, seed_grad)
        support = np.abs(x.grad[0]).sum(0) != 0
        expect = np.zeros((h, w), dtype=bool)
        (r0, r1), (c0, c1) = natten_window(i, h, k), natten_window(j, w, k)
        expect[r0:r1, c0:c1] = True
        if not np.array_equal(support, expect):
            return False, f"support mismatch at ({i},{j}) in {h}x{w}, K={k}"
    return True, f"{trials} trials"


def conv2d_direct(x, weight, bias=None, stride=1, padding=0, groups=1) -> np.ndarray:
    """Nested-loop convolution in float64. Verification only."""
    x = np.asarray(x, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    (sh, sw), (ph, pw) = F._pair(stride), F._pair(padding)
    n, cin, h, w = x.shape
    cout, cg, kh, kw = weight.shape
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    ho, wo = F.conv_out_size(h, kh, sh, ph), F.conv_out_size(w, kw, sw, pw)
    og = cout // groups
    out = np.zeros((n, cout, ho, wo))
    for o in range(cout):
        g = o // og
        for i in range(ho):
            for j in range(wo):
                patch = xp[:, g * cg:(g + 1) * cg, i * sh:i * sh + kh, j * sw:j * sw + kw]
                out[:, o, i, j] = (patch * weight[o]).sum(axis=(1, 2, 3))
    if bias is not None:
        out += np.asarray(bias, dtype=np.float64)[None, :, None, None]
    return out


def conv_oracle_error(instances: int = 60, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        groups = int(rng.choice([1, 2, 4]))
        cin = groups * int(rng.integers(1, 4))
        cout = groups * int(rng.integers(1, 4))
        if rng.random() < 0.25:  # depthwise
            groups, cout = cin, cin
        k = int(rng.choice([1, 3, 5]))
        s, p = int(rng.integers(1, 4)), int(rng.integers(0, k // 2 + 1))
        h, w = (int(v) for v in rng.integers(k, 10, size=2))
        x = rng.normal(size=(2, cin, h, w))
        wt = rng.normal(size=(cout, cin // groups, k, k))
        b = rng.normal(size=cout)
        got = F.conv2d(Tensor(x), Tensor(wt), Tensor(b), s, p, groups).data
        worst = max(worst, float(np.abs(got - conv2d_direct(x, wt, b, s, p, groups)).max()))
    return worst


def pixel_shuffle_roundtrips(count: int = 100, seed: int = 0) -> int:
    """Number of random shapes where unshuffle->shuffle and shuffle->unshuffle are bitwise identities."""
    rng = np.random.default_rng(seed)
    good = 0
    for _ in range(count):
        r = int(rng.integers(1, 5))
        n, c = int(rng.integers(1, 3)), int(rng.integers(1, 5))
        h, w = r * int(rng.integers(1, 5)), r * int(rng.integers(1, 5))
        x = rng.normal(size=(n, c, h, w)).astype(rng.choice([np.float32, np.float64]))
        down = F.pixel_unshuffle(Tensor(x), r)
        back = F.pixel_shuffle(down, r).data
        y = rng.normal(size=(n, c * r * r, h // r, w // r))
        fwd = F.pixel_unshuffle(F.pixel_shuffle(Tensor(y), r), r).data
        good += (
            down.shape == (n, c * r * r, h // r, w // r)
            and back.tobytes() == x.tobytes()
            and fwd.tobytes() == y.tobytes()
        )
    return good


def oracle_suite() -> list[CheckResult]:
    def scan():
        errs = scan_oracle_errors()
        return max(errs) <= SCAN_TOL, f"200 instances, max rel err {max(errs):.2e} (tol {SCAN_TOL:g})"

    def natten():
        errs = natten_oracle_errors()
        return max(errs) <= NATTEN_TOL, f"100 instances, max abs err {max(errs):.2e} (tol {NATTEN_TOL:g})"

    def conv():
        err = conv_oracle_error()
        return err <= CONV_TOL, f"max abs err {err:.2e} (tol {CONV_TOL:g})"

    def global_attn():
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(10):
            layer = GlobalAttention(8, 2, rng=rng).astype(np.float64)
            layer.qkv.weight.data[...] = rng.normal(0, 0.5, layer.qkv.weight.shape)
            x = rng.normal(size=(2, 8, int(rng.integers(1, 6)), int(rng.integers(1, 6))))
            worst = max(worst, float(np.abs(layer(Tensor(x)).data - global_attention_oracle(x, layer)).max()))
        return worst <= 1e-10, f"max abs err {worst:.2e}"

    def shuffle():
        good = pixel_shuffle_roundtrips()
        return good == 100, f"{good}/100 shapes bitwise"

    return [
        _run("scan_vs_reference", scan),
        _run("natten_vs_masked_attention", natten),
        _run("natten_gradient_locality", natten_locality),
        _run("conv_vs_direct_loops", conv),
        _run("global_attention_vs_loop", global_attn),
        _run("pixel_shuffle_roundtrip", shuffle),
    ]


# -- gradients ----------------------------------------------------------------
def _weighted_sum(out: Tensor, rng) -> Tensor:
    """Scalar loss sum(out * w) with fixed random w, so no gradient is trivial."""
    w = Tensor(rng.normal(size=out.shape))
    return T.sum_(T.mul(out, w))


def randomize(module, rng, std: float = 0.3):
    """Perturb every parameter by N(0, std) so the check point is generic,
    not the near-degenerate init where normalisers see almost-constant input."""
    for prm in module.parameters():
        prm.data += rng.normal(0, std, prm.shape)
    return module


def _away_from_zero(rng, shape):
    return np.sign(rng.normal(size=shape)) * rng.uniform(0.1, 1.5, size=shape)


def gradient_cases(seed: int = 0) -> list[tuple[str, Callable, list[Tensor]]]:
    """Every differentiable op as (name, f, inputs); f returns a scalar."""
    rng = np.random.default_rng(seed)
    t = lambda *shape: Tensor(rng.normal(size=shape), requires_grad=True)  # noqa: E731

    def loss_of(fn):
        lw = np.random.default_rng(seed + 7)
        weights = {}

        def f(*xs):
            out = fn(*xs)
            if out.ndim == 0:
                return out
            if out.shape not in weights:
                weights[out.shape] = Tensor(lw.normal(size=out.shape))
            return T.sum_(T.mul(out, weights[out.shape]))

        return f

    cases: list[tuple[str, Callable, list[Tensor]]] = []

    def add(name, fn, *inputs):
        cases.append((name, loss_of(fn), list(inputs)))

    add("add", T.add, t(2, 3, 4), t(2, 3, 4))
    add("add_channel", T.add, t(2, 3, 4), t(3))
    add("add_scalar", lambda a: T.add_scalar(a, 0.7), t(3, 4))
    add("sub", T.sub, t(3, 4), t(3, 4))
    add("neg", T.neg, t(3, 4))
    add("mul", T.mul, t(2, 3, 4), t(2, 3, 4))
    add("mul_channel", T.mul, t(2, 3, 4), t(3))
    add("scale", lambda a: T.scale(a, -1.3), t(3, 4))
    add("relu", T.relu, Tensor(_away_from_zero(rng, (3, 5)), requires_grad=True))
    add("sigmoid", T.sigmoid, t(3, 5))
    add("silu", T.silu, t(3, 5))
    add("gelu", T.gelu, t(3, 5))
    add("exp", T.exp, t(3, 5))
    add("softplus", T.softplus, t(3, 5))
    add("reshape", lambda a: T.reshape(a, (6, 4)), t(2, 3, 4))
    add("transpose", lambda a: T.transpose(a, (2, 0, 1)), t(2, 3, 4))
    add("concat", lambda a, b: T.concat([a, b], axis=1), t(2, 3, 4), t(2, 2, 4))
    add("split", lambda a: T.mul(*T.split(a, [2, 2], axis=1)), t(2, 4, 3))
    add("sum", lambda a: T.sum_(T.mul(a, a), axis=1), t(2, 3, 4))
    add("mean", lambda a: T.mean(T.mul(a, a), axis=(0, 2)), t(2, 3, 4))
    add("matmul", T.matmul, t(2, 3, 4), t(4, 5))
    add("matmul_batched", T.matmul, t(2, 3, 4), t(2, 4, 2))
    add("softmax", lambda a: T.softmax(a, axis=-1), t(3, 5))
    add("log_softmax", lambda a: T.log_softmax(a, axis=1), t(2, 4, 3))
    target = rng.integers(0, 4, size=(2, 3, 3))
    add("cross_entropy", lambda a: T.cross_entropy(a, target, axis=1), t(2, 4, 3, 3))
    add("layer_norm", lambda a, g, b: T.layer_norm(a, g, b, axis=1), t(2, 5, 3), t(5), t(5))
    perms = np.stack([rng.permutation(6) for _ in range(3)])
    add("gather_tokens", lambda a: T.gather_tokens(a, perms), t(2, 3, 6))
    add("scatter_tokens", lambda a: T.scatter_tokens(a, perms), t(2, 3, 6))

    add("conv2d", lambda x, w, b: F.conv2d(x, w, b, 1, 1), t(2, 3, 5, 5), t(4, 3, 3, 3), t(4))
    add("conv2d_strided", lambda x, w, b: F.conv2d(x, w, b, 2, 2), t(1, 2, 7, 6), t(3, 2, 5, 5), t(3))
    add("conv2d_grouped", lambda x, w: F.conv2d(x, w, None, 1, 0, 2), t(1, 4, 4, 4), t(6, 2, 3, 3))
    add("conv2d_depthwise", lambda x, w, b: F.conv2d(x, w, b, 1, 1, 3), t(2, 3, 5, 4), t(3, 1, 3, 3), t(3))
    add("conv2d_pointwise", lambda x, w, b: F.conv2d(x, w, b), t(2, 3, 4, 4), t(5, 3, 1, 1), t(5))
    rm, rv = rng.normal(size=3), rng.uniform(0.5, 2.0, size=3)
    add(
        "batch_norm_train",
        lambda x, g, b: F.batch_norm(x, g, b, np.zeros(3), np.ones(3), True),
        t(4, 3, 3, 3), t(3), t(3),
    )
    add("batch_norm_eval", lambda x, g, b: F.batch_norm(x, g, b, rm, rv, False), t(2, 3, 3, 3), t(3), t(3))
    add("bilinear_up", lambda x: F.bilinear_resize(x, 7, 5), t(1, 2, 3, 2))
    add("bilinear_down", lambda x: F.bilinear_resize(x, 2, 3), t(1, 2, 5, 7))
    add("pixel_unshuffle", lambda x: F.pixel_unshuffle(x, 2), t(1, 2, 4, 6))
    add("pixel_shuffle", lambda x: F.pixel_shuffle(x, 2), t(1, 8, 2, 3))
    add("global_avg_pool", lambda x: F.expand_spatial(F.global_avg_pool(T.mul(x, x)), 3, 2), t(2, 3, 4, 3))
    add("pad_crop", lambda x: F.crop(F.pad_bottom_right(x, 2, 1), 3, 4), t(1, 2, 3, 4))
    add("crop", lambda x: F.crop(x, 2, 3), t(1, 2, 4, 5))

    u_shape = (2, 4, 6)
    A = Tensor(-rng.uniform(0.2, 2.0, size=(4, 3)), requires_grad=True)
    delta = Tensor(rng.uniform(0.05, 1.0, size=u_shape), requires_grad=True)
    add("selective_scan_core", selective_scan, t(*u_shape), delta, A, t(2, 2, 3, 6), t(2, 2, 3, 6), t(4))
    p = random_ssm_params(rng, 6, 2, 2)
    p.x_proj_bias = Tensor(rng.normal(0, 0.5, 6), requires_grad=True)
    add("selective_scan_1d", lambda u, *_: selective_scan_1d(u, p), t(1, 6, 4), *p.tensors())

    nat = random_natten(rng, 4, 3, 2)
    q, k, v = (Tensor(rng.normal(size=(1, 2, 20, 2)), requires_grad=True) for _ in range(3))
    add("natten_core", lambda q, k, v, r: natten_core(q, k, v, r, 4, 5, 3), q, k, v, nat.rpb)
    add("neighborhood_attention", lambda x, *_: nat(x), t(1, 4, 5, 4), *nat.parameters())
    ga = GlobalAttention(4, 2, rng=rng).astype(np.float64)
    ga.qkv.weight.data[...] = rng.normal(0, 0.5, ga.qkv.weight.shape)
    add("global_attention", lambda x, *_: ga(x), t(1, 4, 3, 3), *ga.parameters())
    ss = randomize(SS2D(4, state=2, rng=rng).astype(np.float64), rng)
    add("ss2d", lambda x, *_: ss(x), t(1, 4, 3, 4), *ss.parameters())
    ffn = randomize(FFN(4, 2.0, rng=rng).astype(np.float64), rng)
    add("ffn", lambda x, *_: ffn(x), t(2, 4, 2, 3), *ffn.parameters())
    ctx = randomize(MultiScaleContextScan(4, rng=rng).astype(np.float64), rng)
    add("context_scan", lambda x, *_: ctx(x), t(1, 4, 8, 8), *ctx.parameters())
    return cases


def micro_lass_block(seed: int = 0) -> tuple[LassBlock, Tensor]:
    """Stage-1 block of the Micro preset (Natten then SS2D) on a 1x8x6x6 input."""
    cfg = preset("micro")
    rng = np.random.default_rng(seed)
    block = LassBlock(cfg.stage_channels[0], cfg.window_sizes[0], 0, cfg, rng).astype(np.float64)
    for _, prm in block.named_parameters():
        prm.data += rng.normal(0, 0.05, prm.shape)   # move off the zero/identity init
    x = Tensor(rng.normal(size=(1, cfg.stage_channels[0], 6, 6)), requires_grad=True)
    return block, x


def lass_block_grad_error(seed: int = 0) -> tuple[float, int]:
    block, x = micro_lass_block(seed)
    params = block.parameters()
    lw = Tensor(np.random.default_rng(seed + 1).normal(size=x.shape))
    err = grad_check(lambda x, *_: T.sum_(T.mul(block(x), lw)), [x, *params])
    return err, x.size + sum(p.size for p in params)


def grads_suite() -> list[CheckResult]:
    results = []
    for name, f, inputs in gradient_cases():
        def check(f=f, inputs=inputs):
            err = grad_check(f, inputs)
            return err <= OP_GRAD_TOL, f"rel err {err:.2e} (tol {OP_GRAD_TOL:g})"
        results.append(_run(f"grad_{name}", check))

    def block():
        err, n = lass_block_grad_error()
        return err <= BLOCK_GRAD_TOL, f"{n} coordinates, rel err {err:.2e} (tol {BLOCK_GRAD_TOL:g})"

    results.append(_run("grad_micro_lass_block", block))
    return results


# -- shapes -------------------------------------------------------------------
def shapes_suite() -> list[CheckResult]:
    def tiny_encoder():
        cfg = preset("tiny")
        enc = Encoder(cfg, np.random.default_rng(0)).astype(np.float32).eval()
        with T.no_grad():
            pyr = enc(Tensor(np.random.default_rng(1).random((1, 3, 64, 64), dtype=np.float32)))
        got = [f.shape for f in pyr]
        want = [(1, c, 64 // s, 64 // s) for c, s in zip(cfg.stage_channels, (4, 8, 16, 32))]
        return got == want, f"{got}"

    def logits():
        cfg = preset("micro", num_classes=5)
        net = SegmentationNet(cfg, dtype=np.float64).eval()
        with T.no_grad():
            out = net(Tensor(np.random.default_rng(2).random((2, 3, 64, 64))))
        sums = T.softmax(out, axis=1).data.sum(axis=1)
        dev = float(np.abs(sums - 1).max())
        return out.shape == (2, 5, 64, 64) and dev <= 1e-6, f"{out.shape}, softmax dev {dev:.1e}"

    def padded():
        net = SegmentationNet(preset("micro"), dtype=np.float32).eval()
        with T.no_grad():
            out = net(Tensor(np.zeros((1, 3, 48, 80), dtype=np.float32)))
        return out.shape == (1, 2, 48, 80), f"{out.shape}"

    def batch_independent():
        net = SegmentationNet(preset("micro"), dtype=np.float64).eval()
        x = np.random.default_rng(3).random((2, 3, 32, 32))
        with T.no_grad():
            both = net(Tensor(x)).data
            single = np.concatenate([net(Tensor(x[i:i + 1])).data for i in range(2)])
        err = float(np.abs(both - single).max())
        return err <= 1e-12, f"max diff {err:.1e}"

    def variants():
        shapes = []
        for kw in ({"mixer": "natten"}, {"mixer": "ss2d"}, {"context_scan": False},
                   {"context_downsample": "bilinear"}, {"stage4_global_attention": False}):
            net = SegmentationNet(preset("micro", **kw), dtype=np.float32).eval()
            with T.no_grad():
                shapes.append(net(Tensor(np.zeros((1, 3, 32, 32), dtype=np.float32))).shape)
        return all(s == (1, 2, 32, 32) for s in shapes), f"{len(shapes)} variants"

    return [
        _run("tiny_encoder_pyramid_64", tiny_encoder),
        _run("logits_full_resolution", logits),
        _run("pad_and_crop_non_multiple", padded),
        _run("batch_decomposable_eval", batch_independent),
        _run("architecture_variants", variants),
    ]


# -- io -----------------------------------------------------------------------
def io_suite() -> list[CheckResult]:
    rng = np.random.default_rng(0)

    def smt1():
        arrays = [rng.normal(size=s).astype(d) for s in [(), (3,), (2, 3), (1, 2, 3, 4), (0, 5)]
                  for d in (np.float32, np.float64)]
        arrays.append(np.array([np.nan, np.inf, -0.0, 5e-324]))
        ok = all(
            (b := decode_smt1(encode_smt1(a))).dtype == a.dtype and b.shape == a.shape and b.tobytes() == a.tobytes()
            for a in arrays
        )
        return ok, f"{len(arrays)} arrays"

    def checkpoint():
        net = SegmentationNet(preset("micro"), seed=3)
        state = net.state_dict()
        with tempfile.TemporaryDirectory() as d:
            save_checkpoint(d, state, {"config": net.cfg.to_dict()})
            back, meta = load_checkpoint(d)
        same = back.keys() == state.keys() and all(back[k].tobytes() == state[k].tobytes() for k in state)
        other = SegmentationNet(preset("micro"), seed=4)
        other.load_state_dict(back)
        x = Tensor(rng.random((1, 3, 32, 32), dtype=np.float32))
        with T.no_grad():
            eq = np.array_equal(net.eval()(x).data, other.eval()(x).data)
        cfg_ok = ModelConfig.from_dict(meta["config"]) == net.cfg
        return same and eq and cfg_ok, f"{len(state)} tensors"

    def netpbm():
        g = rng.integers(0, 256, size=(7, 5), dtype=np.uint8)
        c = rng.integers(0, 256, size=(4, 6, 3), dtype=np.uint8)
        with tempfile.TemporaryDirectory() as d:
            write_pgm(Path(d) / "a.pgm", g)
            write_ppm(Path(d) / "b.ppm", c)
            ok = np.array_equal(read_pgm(Path(d) / "a.pgm"), g) and np.array_equal(read_ppm(Path(d) / "b.ppm"), c)
        return ok, "pgm + ppm"

    def csv_values():
        rows = [(32, 1024, float(v)) for v in rng.random(4)]
        buf = io.StringIO()
        csv.writer(buf).writerows((a, b, repr(t)) for a, b, t in rows)
        back = [(int(a), int(b), float(t)) for a, b, t in csv.reader(io.StringIO(buf.getvalue()))]
        return back == rows, "repr floats"

    return [
        _run("smt1_roundtrip", smt1),
        _run("checkpoint_roundtrip", checkpoint),
        _run("netpbm_roundtrip", netpbm),
        _run("csv_roundtrip", csv_values),
    ]


SUITES: dict[str, Callable[[], list[CheckResult]]] = {
    "oracles": oracle_suite,
    "grads": grads_suite,
    "shapes": shapes_suite,
    "io": io_suite,
}


def run_suite(name: str) -> list[CheckResult]:
    if name == "all":
        return [r for fn in SUITES.values() for r in fn()]
    return SUITES[name]()
