"""Separable bicubic resampling (Keys kernel) for degradation and baselines."""

from __future__ import annotations

import math
from typing import Literal

import numpy as np
import numpy.typing as npt

from .errors import DimensionError, ScaleRangeError
from .saam_block import SIZE_TOLERANCE, ScalePair, scaled_size

Direction = Literal["up", "down"]
KEYS_A = -0.5
RealArray = npt.NDArray[np.float64]


def keys_kernel(t: RealArray, a: float = KEYS_A) -> RealArray:
    """Cubic convolution kernel, support [-2, 2]."""
    t = np.abs(t)
    t2, t3 = t * t, t * t * t
    near = (a + 2) * t3 - (a + 3) * t2 + 1
    far = a * t3 - 5 * a * t2 + 8 * a * t - 4 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


def resample_matrix(
    n_in: int, n_out: int, r: float, direction: Direction, antialias: bool = True
) -> RealArray:
    """(n_out, n_in) weights; each row sums to 1 and taps are edge-clamped.

    ``r`` is the magnification (up) or reduction (down) factor that drives the
    center-aligned mapping, so ``n_out`` may be set independently of it.
    """
    s = r if direction == "up" else 1.0 / r
    stretch = min(s, 1.0) if antialias else 1.0
    radius = 2.0 / stretch
    m = np.zeros((n_out, n_in), dtype=np.float64)
    for i in range(n_out):
        center = (i + 0.5) / s - 0.5
        taps = np.arange(math.floor(center - radius), math.ceil(center + radius) + 1)
        weights = keys_kernel(stretch * (taps - center))
        np.add.at(m[i], np.clip(taps, 0, n_in - 1), weights)
        m[i] /= m[i].sum()
    return m


def resampled_size(n: int, r: float, direction: Direction) -> int:
    if direction == "up":
        return scaled_size(n, r)
    return math.floor(n / r + SIZE_TOLERANCE)


def bicubic_resample(
    img: npt.NDArray[np.floating],
    scale: ScalePair,
    direction: Direction,
    out_size: tuple[int, int] | None = None,
    antialias: bool = True,
) -> npt.NDArray[np.floating]:
    """Resample the last two axes of ``img`` by ``scale`` in ``direction``.

    Default sizes are ``floor(n * r)`` up and ``floor(n / r)`` down; ``out_size``
    overrides them while keeping the coordinate mapping of ``scale``.
    """
    if scale.r_v < 1 or scale.r_h < 1:
        msg = f"bicubic_resample needs r >= 1, got {scale}"
        raise ScaleRangeError(msg)
    h, w = img.shape[-2], img.shape[-1]
    if out_size is None:
        out_size = (
            resampled_size(h, scale.r_v, direction),
            resampled_size(w, scale.r_h, direction),
        )
    out_h, out_w = out_size
    if out_h < 1 or out_w < 1:
        msg = f"bicubic {direction} of {h}x{w} by {scale} gives {out_h}x{out_w}"
        raise DimensionError(msg)
    rows = resample_matrix(h, out_h, scale.r_v, direction, antialias)
    cols = resample_matrix(w, out_w, scale.r_h, direction, antialias)
    out = np.matmul(np.matmul(rows, img.astype(np.float64)), cols.T)
    return out.astype(img.dtype)
