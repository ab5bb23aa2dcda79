"""Gradient-variance loss and the L1 + GV training objective."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ConfigError, DimensionError
from .functional import ConvSpec, conv2d
from .tensor import Tensor

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()

GvReduction = Literal["norm", "mse", "l2"]
GV_REDUCTIONS: tuple[GvReduction, ...] = ("norm", "mse", "l2")


@dataclass(frozen=True)
class GvConfig:
    window: int = 8
    lambda_gv: float = 0.01
    reduction: GvReduction = "norm"

    def __post_init__(self) -> None:
        if self.window < 2:
            raise ConfigError("gv_window", f"must be >= 2, got {self.window}")
        if self.lambda_gv < 0:
            raise ConfigError("lambda_gv", f"must be >= 0, got {self.lambda_gv}")
        if self.reduction not in GV_REDUCTIONS:
            raise ConfigError("gv_reduction", f"unknown reduction '{self.reduction}'")


def _fixed(kernel: np.ndarray, like: Tensor) -> Tensor:
    return Tensor(kernel, dtype=like.dtype)


def rgb_to_gray(img: Tensor) -> Tensor:
    """BT.601 luma: 0.299 R + 0.587 G + 0.114 B."""
    if img.ndim != 4 or img.shape[1] != 3:
        msg = f"rgb_to_gray expects (N, 3, H, W), got {img.shape}"
        raise DimensionError(msg)
    kernel = _fixed(np.array(LUMA_WEIGHTS).reshape(1, 3, 1, 1), img)
    return conv2d(img, ConvSpec(kernel=kernel))


def sobel_gradients(gray: Tensor) -> tuple[Tensor, Tensor]:
    """Fixed Sobel responses (G_x, G_y) with zero padding."""
    if gray.ndim != 4 or gray.shape[1] != 1:
        msg = f"sobel_gradients expects a single channel, got {gray.shape}"
        raise DimensionError(msg)
    gx = conv2d(gray, ConvSpec(kernel=_fixed(SOBEL_X.reshape(1, 1, 3, 3), gray), padding=1))
    gy = conv2d(gray, ConvSpec(kernel=_fixed(SOBEL_Y.reshape(1, 1, 3, 3), gray), padding=1))
    return gx, gy


def variance_map(g: Tensor, n: int) -> Tensor:
    """Biased variance of each non-overlapping n×n patch; the remainder is dropped."""
    batch, c, h, w = g.shape
    if h < n or w < n:
        msg = f"variance_map: {h}x{w} map is smaller than one {n}x{n} patch"
        raise DimensionError(msg)
    ph, pw = h // n, w // n
    patches = g[:, :, : ph * n, : pw * n].reshape(batch, c, ph, n, pw, n)
    mu = patches.mean(axis=(3, 5), keepdims=True)
    return (patches - mu).square().mean(axis=(3, 5))


def _variance_gap(v_hr: Tensor, v_sr: Tensor, reduction: GvReduction) -> Tensor:
    """``norm``: mean |dV| over the patch grid; ``mse``: mean dV^2; ``l2``: per-image
    Euclidean norm of dV averaged over the batch."""
    gap = v_hr - v_sr
    if reduction == "norm":
        return gap.abs().mean()
    diff = gap.square()
    if reduction == "mse":
        return diff.mean()
    eps = 1e-12
    return ((diff.sum(axis=(1, 2, 3)) + eps * eps).sqrt() - eps).mean()


def gv_loss(hr: Tensor, sr: Tensor, cfg: GvConfig | None = None) -> Tensor:
    """Gap between patchwise variances of the Sobel gradients of HR and SR."""
    cfg = cfg or GvConfig()
    if hr.shape != sr.shape:
        msg = f"gv_loss: HR {hr.shape} and SR {sr.shape} differ"
        raise DimensionError(msg)
    hx, hy = sobel_gradients(rgb_to_gray(hr))
    sx, sy = sobel_gradients(rgb_to_gray(sr))
    n = cfg.window
    gap_x = _variance_gap(variance_map(hx, n), variance_map(sx, n), cfg.reduction)
    gap_y = _variance_gap(variance_map(hy, n), variance_map(sy, n), cfg.reduction)
    return gap_x + gap_y


@dataclass
class LossTerms:
    l1: Tensor
    gv: Tensor
    total: Tensor


def loss_terms(hr: Tensor, sr: Tensor, cfg: GvConfig | None = None) -> LossTerms:
    """``mean|HR - SR| + lambda_gv * L_GV`` with both terms kept for logging."""
    cfg = cfg or GvConfig()
    if hr.shape != sr.shape:
        msg = f"loss: HR {hr.shape} and SR {sr.shape} differ"
        raise DimensionError(msg)
    l1 = (hr - sr).abs().mean()
    gv = gv_loss(hr, sr, cfg)
    return LossTerms(l1=l1, gv=gv, total=l1 + gv * cfg.lambda_gv)


def total_loss(hr: Tensor, sr: Tensor, lambda_gv: float = 0.01, window: int = 8) -> Tensor:
    return loss_terms(hr, sr, GvConfig(window=window, lambda_gv=lambda_gv)).total
