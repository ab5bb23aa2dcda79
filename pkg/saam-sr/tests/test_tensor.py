import numpy as np
import pytest

from saam_sr.errors import ArgumentError, DimensionError
from saam_sr.tensor import Tensor, concat, is_grad_enabled, no_grad, parameter


def test_integer_input_defaults_to_float32() -> None:
    assert Tensor([1, 2, 3]).dtype == np.float32
    assert Tensor(np.zeros(2, dtype=np.float64)).dtype == np.float64


def test_broadcast_gradients_are_summed_back() -> None:
    x = parameter(np.arange(6.0).reshape(2, 3), dtype=np.float64)
    y = parameter(np.array([[1.0, 2.0, 3.0]]), dtype=np.float64)
    (x * y).sum().backward()
    assert x.grad is not None
    assert y.grad is not None
    np.testing.assert_array_equal(x.grad, np.broadcast_to(y.data, (2, 3)))
    np.testing.assert_array_equal(y.grad, x.data.sum(axis=0, keepdims=True))


def test_reused_tensor_accumulates() -> None:
    x = parameter(np.array([1.0, -2.0, 3.0]), dtype=np.float64)
    (x * x + x).sum().backward()
    assert x.grad is not None
    np.testing.assert_allclose(x.grad, 2 * x.data + 1)


def test_matmul_gradients() -> None:
    a = parameter(np.array([[1.0, 2.0], [3.0, 4.0]]), dtype=np.float64)
    b = parameter(np.array([[0.5], [-1.0]]), dtype=np.float64)
    (a @ b).sum().backward()
    assert a.grad is not None
    assert b.grad is not None
    np.testing.assert_allclose(a.grad, np.ones((2, 1)) @ b.data.T)
    np.testing.assert_allclose(b.grad, a.data.T @ np.ones((2, 1)))


def test_slice_scatters_gradient() -> None:
    x = parameter(np.ones((2, 4)), dtype=np.float64)
    x[:, 1:3].sum().backward()
    assert x.grad is not None
    np.testing.assert_array_equal(x.grad, [[0, 1, 1, 0], [0, 1, 1, 0]])


def test_concat_splits_gradient() -> None:
    a = parameter(np.ones((1, 2)), dtype=np.float64)
    b = parameter(np.ones((2, 2)), dtype=np.float64)
    (concat([a, b], axis=0) * 3.0).sum().backward()
    assert a.grad is not None
    assert b.grad is not None
    np.testing.assert_array_equal(a.grad, np.full((1, 2), 3.0))
    np.testing.assert_array_equal(b.grad, np.full((2, 2), 3.0))


def test_backward_needs_scalar() -> None:
    x = parameter(np.ones(3))
    with pytest.raises(ArgumentError):
        (x * 2.0).backward()


def test_incompatible_shapes() -> None:
    with pytest.raises(DimensionError):
        Tensor(np.ones((2, 3))) + Tensor(np.ones((3, 2)))
    with pytest.raises(DimensionError):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


def test_no_grad_suspends_recording() -> None:
    x = parameter(np.ones(3))
    with no_grad():
        assert not is_grad_enabled()
        y = x * 2.0
    assert is_grad_enabled()
    assert not y.requires_grad
    assert y.op == "leaf"


def test_mean_over_axes() -> None:
    x = parameter(np.arange(8.0).reshape(1, 2, 2, 2), dtype=np.float64)
    m = x.mean(axis=(2, 3), keepdims=True)
    np.testing.assert_allclose(m.data.reshape(-1), [1.5, 5.5])
    m.sum().backward()
    assert x.grad is not None
    np.testing.assert_allclose(x.grad, np.full((1, 2, 2, 2), 0.25))
