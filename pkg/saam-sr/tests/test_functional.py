import numpy as np
import pytest

from saam_sr.errors import ArgumentError, DimensionError
from saam_sr.functional import (
    ConvSpec,
    activation,
    conv2d,
    init_conv,
    nearest_resize,
    softmax,
)
from saam_sr.gradcheck import finite_diff_check
from saam_sr.selftest import conv_oracle, random_conv_case
from saam_sr.tensor import Tensor


def test_conv_matches_nested_loop_oracle(rng: np.random.Generator) -> None:
    worst = 0.0
    for case in range(100):
        x, kernel, bias, stride, padding, groups = random_conv_case(rng, case)
        spec = ConvSpec(
            kernel=Tensor(kernel, dtype=np.float64),
            bias=None if bias is None else Tensor(bias, dtype=np.float64),
            stride=stride,
            padding=padding,
            groups=groups,
        )
        got = conv2d(Tensor(x, dtype=np.float64), spec).data
        worst = max(worst, float(np.abs(got - conv_oracle(x, kernel, bias, stride, padding, groups)).max()))
    assert worst < 1e-5


def test_depthwise_conv_keeps_channels_apart(rng: np.random.Generator) -> None:
    x = rng.normal(size=(1, 3, 5, 5))
    kernel = np.zeros((3, 1, 3, 3))
    kernel[1, 0, 1, 1] = 2.0
    out = conv2d(Tensor(x, dtype=np.float64), ConvSpec(Tensor(kernel, dtype=np.float64), padding=1, groups=3))
    np.testing.assert_allclose(out.data[0, 0], 0.0)
    np.testing.assert_allclose(out.data[0, 1], 2.0 * x[0, 1])


def test_conv_rejects_channel_mismatch() -> None:
    spec = ConvSpec(Tensor(np.ones((2, 3, 3, 3))), padding=1)
    with pytest.raises(DimensionError, match=r"\(1, 4, 5, 5\)"):
        conv2d(Tensor(np.ones((1, 4, 5, 5))), spec)


def test_conv_gradients(rng: np.random.Generator) -> None:
    x = Tensor(rng.normal(size=(1, 2, 5, 6)), dtype=np.float64)
    spec = init_conv(rng, 3, 2, 3, stride=2, dtype=np.float64)
    w = Tensor(rng.normal(size=(1, 3, 3, 3)), dtype=np.float64)
    assert finite_diff_check(lambda t: (conv2d(t, spec) * w).sum(), x) < 1e-4
    assert finite_diff_check(lambda _t: (conv2d(x, spec) * w).sum(), spec.kernel) < 1e-4


def test_softmax_is_stable_and_normalized() -> None:
    s = softmax(Tensor(np.array([[1000.0, 1000.0, 0.0]]), dtype=np.float64))
    np.testing.assert_allclose(s.data, [[0.5, 0.5, 0.0]], atol=1e-12)
    assert np.isfinite(s.data).all()


def test_softmax_of_empty_vector() -> None:
    with pytest.raises(ArgumentError):
        softmax(Tensor(np.zeros((1, 0))))


def test_unknown_activation() -> None:
    with pytest.raises(ArgumentError):
        activation(Tensor(np.ones(2)), "tanh")  # type: ignore[arg-type]


def test_silu_values() -> None:
    y = activation(Tensor(np.array([0.0, 1.0]), dtype=np.float64), "silu")
    np.testing.assert_allclose(y.data, [0.0, 1.0 / (1.0 + np.exp(-1.0))])


def test_nearest_resize_doubles_pixels() -> None:
    x = np.arange(4.0).reshape(1, 1, 2, 2)
    out = nearest_resize(Tensor(x, dtype=np.float64), 4, 4)
    np.testing.assert_array_equal(out.data[0, 0], np.repeat(np.repeat(x[0, 0], 2, 0), 2, 1))


def test_finite_diff_rejects_bad_eps() -> None:
    x = Tensor(np.ones(2), dtype=np.float64)
    with pytest.raises(ArgumentError):
        finite_diff_check(lambda t: t.sum(), x, eps=1e-1)
    with pytest.raises(ArgumentError):
        finite_diff_check(lambda t: t * 2.0, x)


def test_depthwise_multiplier_gradients(rng: np.random.Generator) -> None:
    x = Tensor(rng.normal(size=(2, 3, 7, 6)), dtype=np.float64)
    spec = init_conv(rng, 6, 3, 3, groups=3, stride=2, dtype=np.float64)
    w = Tensor(rng.normal(size=(2, 6, 4, 3)), dtype=np.float64)
    assert finite_diff_check(lambda t: (conv2d(t, spec) * w).sum(), x) < 1e-4
    assert finite_diff_check(lambda _t: (conv2d(x, spec) * w).sum(), spec.kernel) < 1e-4


def test_grouped_conv_matches_oracle_on_a_large_batch(rng: np.random.Generator) -> None:
    x = rng.normal(size=(4, 6, 12, 10))
    kernel = rng.normal(size=(4, 3, 3, 3))
    spec = ConvSpec(Tensor(kernel, dtype=np.float64), padding=1, groups=2)
    got = conv2d(Tensor(x, dtype=np.float64), spec).data
    np.testing.assert_allclose(got, conv_oracle(x, kernel, None, 1, 1, 2), atol=1e-10)


def test_silu_is_increasing_above_its_minimum() -> None:
    t = np.linspace(-1.2785, 8.0, 2001)
    y = activation(Tensor(t, dtype=np.float64), "silu").data
    assert np.all(np.diff(y) >= 0.0)
    assert y[0] == pytest.approx(-0.278465, abs=1e-5)


def test_sigmoid_at_zero_is_a_half() -> None:
    y = activation(Tensor(np.zeros(3), dtype=np.float64), "sigmoid")
    np.testing.assert_allclose(y.data, 0.5)
