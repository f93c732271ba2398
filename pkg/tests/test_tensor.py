import math

import numpy as np
import pytest

from hybridseg import tensor as T
from hybridseg.errors import GraphError, NumericsError, ShapeError
from hybridseg.gradcheck import grad_check
from hybridseg.tensor import Tensor, backward, no_grad


def test_add_and_relu_values():
    assert np.array_equal(T.add(Tensor([1.0, 2.0]), Tensor([3.0, 4.0])).data, [4.0, 6.0])
    assert np.array_equal(T.relu(Tensor([-1.0, 0.0, 2.0])).data, [0.0, 0.0, 2.0])


def test_softplus_at_zero_is_ln2():
    assert T.softplus(Tensor([0.0])).data[0] == pytest.approx(math.log(2.0), abs=1e-15)


def test_softplus_large_inputs_do_not_overflow():
    out = T.softplus(Tensor([800.0, -800.0])).data
    assert out[0] == pytest.approx(800.0) and 0.0 <= out[1] < 1e-300


def test_gelu_is_exact_erf_form():
    x = np.linspace(-3, 3, 13)
    want = [0.5 * v * (1 + math.erf(v / math.sqrt(2))) for v in x]
    assert np.allclose(T.gelu(Tensor(x)).data, want, atol=1e-15)


def test_matmul_examples():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(T.matmul(Tensor(np.eye(2)), a).data, a.data)
    assert T.matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]])).data.tolist() == [[11.0]]


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(5, 7)), rng.normal(size=(7, 3))
    ref = np.zeros((5, 3))
    for i in range(5):
        for j in range(3):
            for k in range(7):
                ref[i, j] += a[i, k] * b[k, j]
    got = T.matmul(Tensor(a), Tensor(b)).data
    assert np.abs(got - ref).max() / np.abs(ref).max() <= 1e-6


def test_softmax_examples():
    assert np.allclose(T.softmax(Tensor([0.0, 0.0, 0.0])).data, [1 / 3] * 3, atol=1e-15)
    assert np.array_equal(T.softmax(Tensor([1000.0, 1000.0])).data, [0.5, 0.5])
    assert np.allclose(T.softmax(Tensor([0.0, math.log(3.0)])).data, [0.25, 0.75], atol=1e-15)


def test_layer_norm_examples():
    one, zero = Tensor(np.ones(2)), Tensor(np.zeros(2))
    const = T.layer_norm(Tensor(np.full((1, 2, 3), 7.0)), one, zero)
    assert np.array_equal(const.data, np.zeros((1, 2, 3)))
    x = Tensor(np.array([[1.0], [3.0]]).reshape(1, 2, 1))
    assert np.allclose(T.layer_norm(x, one, zero, eps=1e-12).data.ravel(), [-1.0, 1.0], atol=1e-9)
    shifted = T.layer_norm(Tensor(np.random.default_rng(0).normal(size=(2, 2, 3))), zero, Tensor(np.full(2, 5.0)))
    assert np.array_equal(shifted.data, np.full((2, 2, 3), 5.0))


def test_backward_linear_and_square():
    x = Tensor(2.0, requires_grad=True)
    backward(T.scale(x, 3.0))
    assert x.grad == 3.0
    x = Tensor(4.0, requires_grad=True)
    backward(T.mul(x, x))
    assert x.grad == 8.0


def test_gradients_accumulate_over_shared_subgraphs():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = T.mul(x, x)
    backward(T.sum_(T.add(y, y)))
    assert np.array_equal(x.grad, [4.0, 8.0])


def test_backward_rejects_non_scalar_without_seed():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(GraphError):
        backward(T.scale(x, 2.0))
    with pytest.raises(GraphError):
        backward(T.sum_(Tensor([1.0])))


def test_no_grad_records_nothing():
    x = Tensor([1.0], requires_grad=True)
    with no_grad():
        y = T.mul(x, x)
    assert not y.requires_grad and y.is_leaf


def test_non_finite_raises_numerics_error():
    with pytest.raises(NumericsError):
        T.exp(Tensor([1000.0]))
    with pytest.raises(NumericsError):
        T.add(Tensor([1.0]), Tensor([np.inf]))


def test_mixed_widths_are_rejected():
    with pytest.raises(TypeError):
        T.add(Tensor(np.ones(2, dtype=np.float32)), Tensor(np.ones(2)))


def test_bad_broadcast_is_shape_error():
    with pytest.raises(ShapeError):
        T.add(Tensor(np.ones((2, 3))), Tensor(np.ones(2)))


def test_concat_examples_and_split_roundtrip():
    a = Tensor(np.random.default_rng(0).normal(size=(2, 3, 4)))
    assert T.concat([a], axis=1).data.tobytes() == a.data.tobytes()
    ones, twos = Tensor(np.ones((1, 1, 2, 2))), Tensor(np.full((1, 1, 2, 2), 2.0))
    cat = T.concat([ones, twos], axis=1).data
    assert (cat[:, 0] == 1).all() and (cat[:, 1] == 2).all()
    b = Tensor(np.random.default_rng(1).normal(size=(2, 5, 4)))
    parts = T.split(T.concat([a, b], axis=1), [3, 5], axis=1)
    assert parts[0].data.tobytes() == a.data.tobytes() and parts[1].data.tobytes() == b.data.tobytes()


def test_reductions_to_scalar_have_rank_zero():
    x = Tensor(np.ones((2, 3)))
    assert T.sum_(x).shape == () and T.mean(x).shape == ()
    assert T.cross_entropy(Tensor(np.zeros((2, 4))), np.zeros(2, dtype=int)).shape == ()


def test_gather_scatter_roundtrip():
    rng = np.random.default_rng(0)
    x = Tensor(rng.normal(size=(2, 3, 7)))
    perms = np.stack([rng.permutation(7) for _ in range(4)])
    back = T.scatter_tokens(T.gather_tokens(x, perms), perms)
    assert np.allclose(back.data, 4 * x.data, atol=0)


def test_grad_check_examples():
    rng = np.random.default_rng(0)
    assert grad_check(lambda x: T.sum_(T.mul(x, x)), Tensor(rng.normal(size=6))) <= 1e-7
    target = rng.integers(0, 5, size=(3, 4))
    err = grad_check(lambda z: T.cross_entropy(z, target, axis=1), Tensor(rng.normal(size=(3, 5, 4))))
    assert err <= 1e-5


def test_grad_check_detects_a_wrong_vjp():
    def broken(x):
        return T.sum_(T.custom_op(x.data ** 2, (x,), lambda g: (g * x.data,), "half_grad_square"))

    assert grad_check(broken, Tensor(np.array([1.0, 2.0, 3.0]))) > 0.1


def test_grad_check_restores_inputs():
    x = Tensor(np.random.default_rng(0).normal(size=5))
    before = x.data.copy()
    grad_check(lambda x: T.sum_(T.exp(x)), x)
    assert x.data.tobytes() == before.tobytes()


def test_cross_entropy_uniform_logits():
    loss = T.cross_entropy(Tensor(np.zeros((2, 4, 3, 3))), np.zeros((2, 3, 3), dtype=int), axis=1)
    assert loss.item() == pytest.approx(math.log(4.0))
