import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import central_difference
from tdlgm import autodiff as ad
from tdlgm.autodiff import DomainError, Node, ParamSet, ShapeError

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def grad_of(fn, x):
    leaf = Node(x)
    return ad.backward(fn(leaf), {"x": leaf})["x"]


UNARY = {
    "sigmoid": (ad.sigmoid, lambda x: 1 / (1 + np.exp(-x))),
    "tanh": (ad.tanh, np.tanh),
    "exp": (ad.exp, np.exp),
    "softplus": (ad.softplus, lambda x: np.log1p(np.exp(x))),
    "square": (ad.square, np.square),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_gradients_match_finite_differences(name):
    op, ref = UNARY[name]
    x = np.random.default_rng(1).normal(size=(3, 4))
    g = grad_of(lambda n: ad.sum(op(n)), x)
    num = central_difference(lambda y: ref(y).sum(), x)
    np.testing.assert_allclose(g, num, rtol=1e-6, atol=1e-8)


def test_log_gradient_and_domain():
    x = np.array([[0.5, 2.0, 3.0]])
    np.testing.assert_allclose(grad_of(lambda n: ad.sum(ad.log(n)), x), 1 / x)
    with pytest.raises(DomainError):
        ad.log(ad.constant([[1.0, 0.0]]))


def test_sigmoid_extreme_inputs_are_finite():
    out = ad.sigmoid(ad.constant([[-800.0, 0.0, 800.0]])).value
    np.testing.assert_array_equal(out, [[0.0, 0.5, 1.0]])


def test_softplus_large_input_is_identity():
    assert ad.softplus(ad.constant([[800.0]])).item() == 800.0


def test_matmul_gradients():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(2, 3)), rng.normal(size=(3, 4))
    A, B = Node(a), Node(b)
    g = ad.backward(ad.sum(A @ B), {"a": A, "b": B})
    np.testing.assert_allclose(g["a"], np.ones((2, 4)) @ b.T)
    np.testing.assert_allclose(g["b"], a.T @ np.ones((2, 4)))


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeError):
        ad.constant(np.ones((2, 3))) @ ad.constant(np.ones((2, 3)))


def test_broadcast_add_reduces_gradient():
    x = Node(np.ones((4, 3)))
    b = Node(np.zeros(3))
    g = ad.backward(ad.sum(x + b), {"b": b})
    np.testing.assert_array_equal(g["b"], [4.0, 4.0, 4.0])


def test_incompatible_broadcast_raises():
    with pytest.raises(ShapeError):
        ad.constant(np.ones((2, 3))) + ad.constant(np.ones((4,)))


def test_slice_and_concat_round_trip_gradient():
    x = Node(np.arange(6.0).reshape(2, 3))
    y = ad.concat([x[:, 2:], x[:, :2]], axis=1)
    np.testing.assert_array_equal(y.value, [[2, 0, 1], [5, 3, 4]])
    g = ad.backward(ad.sum(ad.mul(y, ad.constant(np.arange(6.0).reshape(2, 3)))), {"x": x})
    np.testing.assert_array_equal(g["x"], [[1, 2, 0], [4, 5, 3]])


def test_mean_axis_gradient():
    x = np.random.default_rng(3).normal(size=(3, 5))
    g = grad_of(lambda n: ad.sum(ad.square(ad.mean(n, axis=1))), x)
    np.testing.assert_allclose(g, np.repeat(2 * x.mean(1, keepdims=True) / 5, 5, axis=1))


def test_shared_node_gradients_accumulate():
    x = Node(np.array([[3.0]]))
    y = x * x + x
    assert ad.backward(y, {"x": x})["x"].item() == 7.0


def test_unreachable_parameter_gets_zero_gradient():
    x, z = Node(np.ones((1, 2))), Node(np.ones((2, 2)))
    g = ad.backward(ad.sum(x), {"x": x, "z": z})
    np.testing.assert_array_equal(g["z"], np.zeros((2, 2)))


def test_backward_needs_scalar_root():
    with pytest.raises(ShapeError):
        ad.backward(Node(np.ones((2, 2))), {})


def test_node_value_is_read_only_but_source_is_not():
    arr = np.ones(3)
    n = Node(arr)
    with pytest.raises(ValueError):
        n.value[0] = 2.0
    arr[0] = 5.0  # caller's buffer untouched by the flag


def test_deep_chain_does_not_recurse():
    x = Node(np.array([[1.0]]))
    y = x
    for _ in range(5000):
        y = y + 0.0
    assert ad.backward(y, {"x": x})["x"].item() == 1.0


def test_paramset_helpers():
    p = ParamSet({"a.W0": np.ones((2, 2)), "a.b0": np.zeros(2), "c": np.ones(3)})
    assert p.num_values() == 9
    assert sorted(p.subset("a.")) == ["a.W0", "a.b0"]
    q = p.copy()
    q["c"][0] = 7.0
    assert p["c"][0] == 1.0


def test_grad_check_detects_wrong_backward(monkeypatch):
    fwd, bwd, arity = ad.PRIMITIVES["tanh"]
    monkeypatch.setitem(ad.PRIMITIVES, "tanh", (fwd, lambda g, v, out, a: [g * out], arity))
    params = {"x": np.array([[0.3, -0.7]])}
    assert ad.grad_check(lambda p: ad.sum(ad.tanh(p["x"])), params) > 0.1


@given(arrays(np.float64, (2, 3), elements=finite), arrays(np.float64, (3, 2), elements=finite))
def test_property_composite_gradient_matches_central_differences(a, b):
    def loss(p):
        z = ad.tanh(p["a"] @ p["b"])
        return ad.mean(ad.square(z)) + ad.sum(ad.sigmoid(p["a"]))

    leaves = {"a": Node(a), "b": Node(b)}
    g = ad.backward(loss(leaves), leaves)
    num_a = central_difference(lambda x: loss({"a": ad.constant(x), "b": ad.constant(b)}).item(), a)
    num_b = central_difference(lambda x: loss({"a": ad.constant(a), "b": ad.constant(x)}).item(), b)
    np.testing.assert_allclose(g["a"], num_a, rtol=1e-5, atol=1e-8)
    np.testing.assert_allclose(g["b"], num_b, rtol=1e-5, atol=1e-8)


@given(arrays(np.float64, (3, 4), elements=finite))
def test_property_add_sub_identity(x):
    n = ad.constant(x)
    np.testing.assert_array_equal((n + n - n).value, x)
