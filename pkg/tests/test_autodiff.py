import numpy as np
import pytest

from hqradar import autodiff as ad
from hqradar.autodiff import Tensor, backward
from hqradar.errors import NumericError, ParameterError

rng = np.random.default_rng(0)


def test_add_mul_broadcast(gradcheck):
    gradcheck(lambda a, b: a * b + a, rng.standard_normal((3, 4)), rng.standard_normal(4))
    gradcheck(lambda a, b: a + b, rng.standard_normal((2, 1, 3)), rng.standard_normal((4, 1)))


def test_sub_neg_power(gradcheck):
    gradcheck(lambda a, b: (a - b) ** 2 - (-a), rng.standard_normal(5), rng.standard_normal(5))


def test_matmul(gradcheck):
    gradcheck(lambda a, b: a @ b, rng.standard_normal((3, 4)), rng.standard_normal((4, 2)))


def test_reshape_getitem_reductions(gradcheck):
    x = rng.standard_normal((2, 3, 4))
    gradcheck(lambda a: a.reshape(6, 4)[1:4].sum(axis=0), x)
    gradcheck(lambda a: a.mean(axis=(0, 2), keepdims=True), x)
    gradcheck(lambda a: a[np.array([0, 0, 1])], x)


def test_exp_log_tanh(gradcheck):
    x = rng.uniform(0.5, 2.0, (3, 3))
    gradcheck(lambda a: ad.exp(a) + ad.log(a) * ad.tanh(a), x)


def test_concat_split_roundtrip(gradcheck):
    x = rng.standard_normal((3, 8))
    parts = ad.split(Tensor(x), 4)
    assert [p.shape for p in parts] == [(3, 2)] * 4
    np.testing.assert_array_equal(ad.concat(parts, -1).data, x)
    gradcheck(lambda a: ad.concat([p * float(i + 1) for i, p in enumerate(ad.split(a, 4))], -1), x)


def test_split_rejects_indivisible():
    with pytest.raises(ParameterError):
        ad.split(Tensor(np.zeros((2, 5))), 2)


def test_fan_out_accumulates():
    # y = x*x + 3x, dy/dx = 2x + 3
    x = Tensor(np.array([1.5, -2.0]), requires_grad=True)
    y = (x * x + x * 3.0).sum()
    backward(y)
    np.testing.assert_allclose(x.grad, [6.0, -1.0])


def test_diamond_graph_visits_each_node_once():
    x = Tensor(np.array(2.0), requires_grad=True)
    h = x * x
    y = h * h + h
    backward(y)
    # d/dx (x^4 + x^2) = 4x^3 + 2x
    assert float(x.grad) == pytest.approx(36.0)


def test_only_leaves_keep_grad():
    x = Tensor(np.ones(3), requires_grad=True)
    h = x * 2.0
    backward(h.sum())
    assert h.grad is None
    np.testing.assert_array_equal(x.grad, [2.0, 2.0, 2.0])


def test_constants_get_no_grad():
    x = Tensor(np.ones(3), requires_grad=True)
    c = Tensor(np.ones(3))
    backward((x * c).sum())
    assert c.grad is None


def test_backward_needs_scalar():
    with pytest.raises(ParameterError):
        backward(Tensor(np.ones(3), requires_grad=True) * 2.0)


def test_custom_node_hook():
    x = Tensor(np.array([0.3, 0.7]), requires_grad=True)
    y = ad.make_node(np.sin(x.data), (x,), lambda g: (g * np.cos(x.data),), "sin")
    backward(y.sum())
    np.testing.assert_allclose(x.grad, np.cos([0.3, 0.7]))


def test_debug_mode_catches_nan():
    ad.set_debug(True)
    try:
        with pytest.raises(NumericError), np.errstate(invalid="ignore"):
            ad.log(Tensor(np.array([-1.0])))
    finally:
        ad.set_debug(False)


def test_deep_chain_does_not_recurse():
    x = Tensor(np.array(1.0), requires_grad=True)
    y = x
    for _ in range(5000):
        y = y * 1.0
    backward(y)
    assert float(x.grad) == 1.0
