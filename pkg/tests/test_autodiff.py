"""Gradient engine: every op against central differences."""

import numpy as np
import pytest

from atr.autodiff import Tensor, concat, maximum, minimum, parameter


def gradcheck(fn, *arrays, eps=1e-6, tol=1e-6):
    """Compare reverse-mode gradients of a scalar fn with central FD."""
    params = [parameter(a) for a in arrays]
    fn(*params).backward()
    for p, base in zip(params, arrays):
        flat = base.ravel()
        fd = np.zeros_like(flat)
        for k in range(flat.size):
            plus, minus = flat.copy(), flat.copy()
            plus[k] += eps
            minus[k] -= eps
            inputs_p = [q.data if q is not p else plus.reshape(base.shape)
                        for q in params]
            inputs_m = [q.data if q is not p else minus.reshape(base.shape)
                        for q in params]
            fd[k] = (fn(*map(Tensor, inputs_p)).data
                     - fn(*map(Tensor, inputs_m)).data) / (2 * eps)
        got = p.grad.ravel()
        scale = np.maximum(1.0, np.abs(fd))
        assert np.all(np.abs(got - fd) / scale < tol), (
            f"gradient mismatch: {got} vs {fd}")


RNG = np.random.default_rng(12)


def test_arithmetic_with_broadcasting():
    a = RNG.normal(size=(3, 4))
    b = RNG.normal(size=(1, 4))
    c = RNG.normal(size=(3, 1))
    gradcheck(lambda x, y, z: ((x + y) * z - y / (z * z + 2.0)).sum(), a, b, c)


def test_scalar_reflected_operators():
    a = RNG.normal(size=5)
    gradcheck(lambda x: (2.0 + x).sum(), a)
    gradcheck(lambda x: (2.0 - x).sum(), a)
    gradcheck(lambda x: (2.0 * x).sum(), a)
    gradcheck(lambda x: (2.0 / (x + 5.0)).sum(), a)
    gradcheck(lambda x: (-x).sum(), a)


def test_matmul():
    a = RNG.normal(size=(4, 3))
    b = RNG.normal(size=(3, 2))
    gradcheck(lambda x, y: (x @ y).sum(), a, b)
    v = Tensor(RNG.normal(size=(2, 4)))
    gradcheck(lambda x, y: ((v @ x) @ y).square().sum(), a, b)


def test_activations():
    a = RNG.normal(size=8)
    gradcheck(lambda x: x.exp().sum(), a)
    gradcheck(lambda x: (x * x + 0.5).log().sum(), a)
    gradcheck(lambda x: x.tanh().sum(), a)
    gradcheck(lambda x: x.sigmoid().sum(), a)
    gradcheck(lambda x: x.square().sum(), a)
    gradcheck(lambda x: (x * x + 1.0).sqrt().sum(), a)


def test_elu_covers_both_branches():
    a = np.array([-2.0, -0.5, 0.5, 2.0])
    gradcheck(lambda x: x.elu().sum(), a)
    out = Tensor(a).elu()
    assert out.data == pytest.approx([np.expm1(-2.0), np.expm1(-0.5), 0.5, 2.0])


def test_clip_passes_inside_and_blocks_outside():
    a = np.array([-2.0, -0.3, 0.4, 1.7])
    p = parameter(a)
    (p.clip(-1.0, 1.0) * np.array([1.0, 10.0, 100.0, 1000.0])).sum().backward()
    assert p.grad.tolist() == [0.0, 10.0, 100.0, 0.0]


def test_reductions():
    a = RNG.normal(size=(3, 4))
    gradcheck(lambda x: x.sum(), a)
    gradcheck(lambda x: x.sum(axis=0).square().sum(), a)
    gradcheck(lambda x: x.sum(axis=1, keepdims=True).square().sum(), a)
    gradcheck(lambda x: x.mean(), a)
    gradcheck(lambda x: x.mean(axis=1).square().sum(), a)


def test_indexing_and_reshape():
    a = RNG.normal(size=(4, 3))
    gradcheck(lambda x: x[1:3].sum(), a)
    gradcheck(lambda x: x.reshape(3, 4)[:, 1].square().sum(), a)
    # a row gathered twice must count twice
    p = parameter(np.array([1.0, 2.0, 3.0]))
    p[np.array([0, 0, 1])].sum().backward()
    assert p.grad.tolist() == [2.0, 1.0, 0.0]


def test_concat_routes_gradients_to_each_piece():
    a = RNG.normal(size=(2, 3))
    b = RNG.normal(size=(2, 2))
    gradcheck(lambda x, y: concat([x, y], axis=1).square().sum(), a, b)
    gradcheck(lambda x, y: concat([x.tanh(), y, x], axis=1).sum(), a, b)


def test_minimum_maximum():
    a = RNG.normal(size=6)
    b = RNG.normal(size=6)
    gradcheck(lambda x, y: minimum(x, y).sum(), a, b)
    gradcheck(lambda x, y: maximum(x * 0.5, y).square().sum(), a, b)


def test_detach_blocks_the_gradient_path():
    a = parameter(np.array([1.0, 2.0]))
    b = parameter(np.array([3.0, 4.0]))
    (a * b.detach()).sum().backward()
    assert a.grad.tolist() == [3.0, 4.0]
    assert b.grad is None
    stopped = b.detach()
    assert np.array_equal(stopped.data, b.data)
    assert not stopped.requires_grad


def test_reused_node_accumulates_both_paths():
    x = parameter(np.array([3.0]))
    y = x * x + x
    y.backward()
    assert x.grad.tolist() == [7.0]  # 2x + 1


def test_two_losses_accumulate_into_one_parameter():
    x = parameter(np.array([2.0]))
    (x * 3.0).sum().backward()
    (x.square()).sum().backward()
    assert x.grad.tolist() == [7.0]  # 3 + 2x


def test_long_chain_backward_is_iterative():
    x = parameter(np.array([1.0]))
    y = x
    for _ in range(5000):
        y = y * 1.0001
    y.backward()
    assert x.grad[0] == pytest.approx(1.0001 ** 5000, rel=1e-9)


def test_backward_needs_a_scalar_seed():
    x = parameter(np.ones((2, 2)))
    with pytest.raises(ValueError):
        (x * 2.0).backward()
    (x * 2.0).backward(np.ones((2, 2)))
    assert np.array_equal(x.grad, np.full((2, 2), 2.0))


def test_constants_do_not_build_graph():
    a = Tensor(np.ones(3))
    b = Tensor(np.ones(3))
    out = (a + b) * 2.0
    assert not out.requires_grad
    assert out._parents == ()
