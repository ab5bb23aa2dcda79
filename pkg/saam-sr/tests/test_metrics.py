import math

import numpy as np
import pytest

from saam_sr.errors import DimensionError
from saam_sr.metrics import (
    PSNR_CAP,
    QualityReport,
    crop_border,
    gaussian_window,
    luma,
    psnr,
    ssim,
)


def scalar_psnr(a: np.ndarray, b: np.ndarray) -> float:
    ya, yb = luma(a), luma(b)
    total = 0.0
    for i in range(ya.shape[0]):
        for j in range(ya.shape[1]):
            total += (ya[i, j] - yb[i, j]) ** 2
    mse = total / ya.size
    return min(PSNR_CAP, 10 * math.log10(1 / mse))


def scalar_ssim(a: np.ndarray, b: np.ndarray) -> float:
    x, y = luma(a), luma(b)
    g = gaussian_window()
    w = np.outer(g, g)
    k = g.size
    c1, c2 = 0.01**2, 0.03**2
    scores = []
    for i in range(x.shape[0] - k + 1):
        for j in range(x.shape[1] - k + 1):
            px, py = x[i : i + k, j : j + k], y[i : i + k, j : j + k]
            mx, my = (w * px).sum(), (w * py).sum()
            vx = (w * px * px).sum() - mx * mx
            vy = (w * py * py).sum() - my * my
            cxy = (w * px * py).sum() - mx * my
            scores.append(
                ((2 * mx * my + c1) * (2 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
            )
    return float(np.mean(scores))


def test_one_level_offset_gives_known_psnr() -> None:
    a = np.full((3, 8, 8), 0.5)
    assert psnr(a, a + 1 / 255) == pytest.approx(48.1308, abs=1e-2)


def test_identical_images_are_capped() -> None:
    a = np.random.default_rng(0).uniform(size=(3, 12, 12))
    assert psnr(a, a) == PSNR_CAP
    assert ssim(a, a) == pytest.approx(1.0)


def test_metrics_match_scalar_reference(rng: np.random.Generator) -> None:
    for _ in range(20):
        a = rng.uniform(size=(3, 14, 15))
        b = np.clip(a + rng.normal(0, 0.05, size=a.shape), 0, 1)
        assert psnr(a, b) == pytest.approx(scalar_psnr(a, b), abs=1e-6)
        assert ssim(a, b) == pytest.approx(scalar_ssim(a, b), abs=1e-6)


def test_border_crop_ignores_edges() -> None:
    a = np.zeros((3, 20, 20))
    b = a.copy()
    b[:, :2, :] = 1.0
    assert psnr(a, b, crop=2) == PSNR_CAP
    assert psnr(a, b) < 20
    assert crop_border(2.0) == 2
    assert crop_border(2.5) == 3


def test_luma_weights() -> None:
    img = np.stack([np.ones((2, 2)), np.zeros((2, 2)), np.zeros((2, 2))])
    np.testing.assert_allclose(luma(img), 0.299)
    with pytest.raises(DimensionError):
        luma(np.zeros((2, 4, 4)))


def test_shape_and_size_errors() -> None:
    with pytest.raises(DimensionError):
        psnr(np.zeros((3, 8, 8)), np.zeros((3, 8, 9)))
    with pytest.raises(DimensionError, match="SSIM window"):
        ssim(np.zeros((3, 10, 10)), np.zeros((3, 10, 10)))
    with pytest.raises(DimensionError, match="border crop"):
        psnr(np.zeros((3, 4, 4)), np.zeros((3, 4, 4)), crop=2)


def test_report_rows_and_means(rng: np.random.Generator) -> None:
    report = QualityReport("saam", 2.0, 3.0, crop=3)
    a = rng.uniform(size=(3, 24, 24))
    row = report.add("b.png", a, a)
    report.add("a.png", a, np.clip(a + 0.1, 0, 1))
    assert row.psnr_db == PSNR_CAP
    report.sort()
    assert [r.image for r in report.rows] == ["a.png", "b.png"]
    assert report.mean_psnr == pytest.approx((report.rows[0].psnr_db + PSNR_CAP) / 2)
    assert 0 < report.mean_ssim <= 1
    assert QualityReport("bicubic", 2, 2, 2).mean_psnr == 0.0
