"""PSNR / SSIM on the luma channel with border crop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError
from .losses import LUMA_WEIGHTS

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2

RealArray = npt.NDArray[np.float64]


def luma(img: npt.NDArray[np.floating]) -> RealArray:
    """(3, H, W) RGB or (1, H, W) / (H, W) gray -> (H, W) float64."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[0] == 1:
        return arr[0]
    if arr.ndim == 3 and arr.shape[0] == 3:
        r, g, b = LUMA_WEIGHTS
        return r * arr[0] + g * arr[1] + b * arr[2]
    msg = f"expected a single image (C, H, W) with C in (1, 3), got {arr.shape}"
    raise DimensionError(msg)


def _prepare(
    a: npt.NDArray[np.floating], b: npt.NDArray[np.floating], crop: int
) -> tuple[RealArray, RealArray]:
    if a.shape != b.shape:
        msg = f"images differ in shape: {a.shape} vs {b.shape}"
        raise DimensionError(msg)
    ya, yb = luma(a), luma(b)
    if crop:
        ya, yb = ya[crop:-crop, crop:-crop], yb[crop:-crop, crop:-crop]
    if ya.size == 0:
        msg = f"border crop {crop} leaves nothing of {a.shape}"
        raise DimensionError(msg)
    return ya, yb


def crop_border(scale_max: float) -> int:
    return math.ceil(scale_max)


def psnr(a: npt.NDArray[np.floating], b: npt.NDArray[np.floating], crop: int = 0) -> float:
    """``10 log10(1 / MSE)`` for unit-range images, capped at 100 dB."""
    ya, yb = _prepare(a, b, crop)
    mse = float(np.mean((ya - yb) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> RealArray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: RealArray, g: RealArray) -> RealArray:
    k = g.size
    rows = sliding_window_view(img, k, axis=1) @ g
    return sliding_window_view(rows, k, axis=0) @ g


def ssim(a: npt.NDArray[np.floating], b: npt.NDArray[np.floating], crop: int = 0) -> float:
    """Mean local SSIM with an 11×11 Gaussian window (sigma 1.5), valid region."""
    x, y = _prepare(a, b, crop)
    if min(x.shape) < SSIM_WINDOW:
        msg = f"image {x.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        raise DimensionError(msg)
    g = gaussian_window()
    mu_x, mu_y = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mu_x * mu_x
    syy = _filter_valid(y * y, g) - mu_y * mu_y
    sxy = _filter_valid(x * y, g) - mu_x * mu_y
    num = (2 * mu_x * mu_y + SSIM_C1) * (2 * sxy + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (sxx + syy + SSIM_C2)
    return float(np.mean(num / den))


@dataclass
class ImageScore:
    image: str
    scale_v: float
    scale_h: float
    psnr_db: float
    ssim: float


@dataclass
class QualityReport:
    """Per-image scores for one method at one scale."""

    method: str
    scale_v: float
    scale_h: float
    crop: int
    rows: list[ImageScore] = field(default_factory=list)

    def add(self, image: str, a: npt.NDArray[np.floating], b: npt.NDArray[np.floating]) -> ImageScore:
        score = ImageScore(
            image=image,
            scale_v=self.scale_v,
            scale_h=self.scale_h,
            psnr_db=psnr(a, b, self.crop),
            ssim=ssim(a, b, self.crop),
        )
        self.rows.append(score)
        return score

    def sort(self) -> None:
        self.rows.sort(key=lambda r: r.image)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([r.psnr_db for r in self.rows])) if self.rows else 0.0

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([r.ssim for r in self.rows])) if self.rows else 0.0
