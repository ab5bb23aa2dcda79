import numpy as np
import pytest

from saam_sr.errors import ConfigError, DimensionError
from saam_sr.losses import (
    GvConfig,
    gv_loss,
    loss_terms,
    rgb_to_gray,
    sobel_gradients,
    total_loss,
    variance_map,
)
from saam_sr.tensor import Tensor

F64 = np.float64


def image(rng: np.random.Generator, shape: tuple[int, ...] = (2, 3, 16, 16)) -> Tensor:
    return Tensor(rng.uniform(size=shape), dtype=F64)


def test_identical_images_cost_nothing(rng: np.random.Generator) -> None:
    hr = image(rng)
    terms = loss_terms(hr, Tensor(hr.data.copy(), dtype=F64))
    assert terms.l1.item() == 0.0
    assert terms.gv.item() == 0.0
    assert terms.total.item() == 0.0


def test_l2_reduction_is_zero_for_identical_images(rng: np.random.Generator) -> None:
    hr = image(rng)
    gv = gv_loss(hr, Tensor(hr.data.copy(), dtype=F64), GvConfig(reduction="l2"))
    assert gv.item() == pytest.approx(0.0, abs=1e-10)


def test_variance_map_of_a_single_patch() -> None:
    g = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2), dtype=F64)
    np.testing.assert_allclose(variance_map(g, 2).data, [[[[1.25]]]])


def test_variance_map_drops_the_remainder(rng: np.random.Generator) -> None:
    g = Tensor(rng.normal(size=(1, 1, 10, 7)), dtype=F64)
    v = variance_map(g, 3).data
    assert v.shape == (1, 1, 3, 2)
    np.testing.assert_allclose(v[0, 0, 2, 1], g.data[0, 0, 6:9, 3:6].var())


def test_variance_map_needs_one_patch() -> None:
    with pytest.raises(DimensionError):
        variance_map(Tensor(np.zeros((1, 1, 4, 9))), 8)


def test_luma_of_white_is_one() -> None:
    gray = rgb_to_gray(Tensor(np.ones((1, 3, 4, 4)), dtype=F64)).data
    np.testing.assert_allclose(gray, 1.0)


def test_sobel_of_horizontal_ramp() -> None:
    ramp = np.tile(np.arange(6.0), (6, 1)).reshape(1, 1, 6, 6)
    gx, gy = sobel_gradients(Tensor(ramp, dtype=F64))
    np.testing.assert_allclose(gx.data[0, 0, 1:-1, 1:-1], 8.0)
    np.testing.assert_allclose(gy.data[0, 0, 1:-1, 1:-1], 0.0)


def test_zero_lambda_leaves_plain_l1(rng: np.random.Generator) -> None:
    hr, sr = image(rng), image(rng)
    total = total_loss(hr, sr, lambda_gv=0.0).item()
    assert total == pytest.approx(float(np.abs(hr.data - sr.data).mean()))


def test_total_adds_weighted_gv(rng: np.random.Generator) -> None:
    hr, sr = image(rng), image(rng)
    terms = loss_terms(hr, sr, GvConfig(lambda_gv=0.5))
    assert terms.gv.item() > 0
    assert terms.total.item() == pytest.approx(terms.l1.item() + 0.5 * terms.gv.item())


def test_gv_penalises_blur(rng: np.random.Generator) -> None:
    hr = image(rng, (1, 3, 16, 16))
    blurred = Tensor(np.full_like(hr.data, hr.data.mean()), dtype=F64)
    assert gv_loss(hr, blurred).item() > gv_loss(hr, hr).item()


def expected_gap(hr: Tensor, sr: Tensor, reduce: str) -> float:
    total = 0.0
    for a, b in zip(sobel_gradients(rgb_to_gray(hr)), sobel_gradients(rgb_to_gray(sr)), strict=True):
        gap = variance_map(a, 8).data - variance_map(b, 8).data
        total += float(np.abs(gap).mean() if reduce == "abs" else (gap**2).mean())
    return total


def test_default_gv_is_mean_absolute_variance_gap(rng: np.random.Generator) -> None:
    hr, sr = image(rng), image(rng)
    assert GvConfig().reduction == "norm"
    assert gv_loss(hr, sr).item() == pytest.approx(expected_gap(hr, sr, "abs"), rel=1e-12)
    mse = gv_loss(hr, sr, GvConfig(reduction="mse")).item()
    assert mse == pytest.approx(expected_gap(hr, sr, "square"), rel=1e-12)
    assert mse != pytest.approx(gv_loss(hr, sr).item())


def test_bad_gv_settings() -> None:
    with pytest.raises(ConfigError) as err:
        GvConfig(reduction="l1")  # type: ignore[arg-type]
    assert err.value.field == "gv_reduction"
    with pytest.raises(ConfigError):
        GvConfig(window=1)
    with pytest.raises(ConfigError):
        GvConfig(lambda_gv=-1.0)


def test_shape_mismatch(rng: np.random.Generator) -> None:
    with pytest.raises(DimensionError):
        loss_terms(image(rng, (1, 3, 16, 16)), image(rng, (1, 3, 16, 17)))
    with pytest.raises(DimensionError):
        rgb_to_gray(image(rng, (1, 4, 8, 8)))
