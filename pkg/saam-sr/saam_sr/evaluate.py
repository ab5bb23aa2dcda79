"""Inference and PSNR/SSIM evaluation against bicubic degradation."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import ImageArray
from .errors import DataError
from .metrics import QualityReport, crop_border
from .model import Model, forward, set_training
from .resample import bicubic_resample, resampled_size
from .saam_block import ScalePair, scaled_size
from .tensor import Tensor, no_grad

logger = logging.getLogger(__name__)


def super_resolve(model: Model, lr: ImageArray, scale: ScalePair) -> ImageArray:
    """(3, h, w) -> (3, floor(h r_v), floor(w r_h)), clamped to [0, 1].

    Batch-norm slots are switched to their running statistics first.
    """
    set_training(model, False)
    batch = Tensor(lr[None], dtype=model.dtype)
    with no_grad():
        out = forward(model, batch, scale).data[0]
    return np.clip(out, 0.0, 1.0).astype(np.float32)


@dataclass
class EvalPair:
    """Aligned HR reference and its bicubic LR."""

    hr: ImageArray
    lr: ImageArray


def degrade(hr: ImageArray, scale: ScalePair, min_lr: int = 4) -> EvalPair:
    """Crop HR to ``floor(floor(H / r) * r)`` and downscale it to exactly ``floor(H / r)``."""
    h, w = hr.shape[1], hr.shape[2]
    lr_h = resampled_size(h, scale.r_v, "down")
    lr_w = resampled_size(w, scale.r_h, "down")
    if lr_h < min_lr or lr_w < min_lr:
        msg = f"{h}x{w} image gives a {lr_h}x{lr_w} input at scale {scale}"
        raise DataError(msg)
    out_h, out_w = scaled_size(lr_h, scale.r_v), scaled_size(lr_w, scale.r_h)
    ref = np.ascontiguousarray(hr[:, :out_h, :out_w])
    lr = bicubic_resample(ref, scale, "down", out_size=(lr_h, lr_w))
    return EvalPair(hr=ref, lr=np.clip(lr, 0.0, 1.0).astype(np.float32))


def evaluate(
    model: Model,
    images: list[tuple[str, ImageArray]],
    scale: ScalePair,
    baseline: bool = False,
    workers: int = 1,
) -> list[QualityReport]:
    """Score the model (and optionally bicubic) on every image.

    Rows are sorted by file name whatever order the workers finish in.
    """
    scale.check(model.config.max_scale)
    crop = crop_border(scale.max)
    ours = QualityReport("saam", scale.r_v, scale.r_h, crop)
    bicubic = QualityReport("bicubic", scale.r_v, scale.r_h, crop)
    set_training(model, False)
    min_lr = max(model.config.k_u, 2)

    def score(item: tuple[str, ImageArray]) -> tuple[str, EvalPair, ImageArray, ImageArray | None]:
        name, hr = item
        pair = degrade(hr, scale, min_lr)
        sr = super_resolve(model, pair.lr, scale)
        base = None
        if baseline:
            up = bicubic_resample(pair.lr, scale, "up", out_size=(pair.hr.shape[1], pair.hr.shape[2]))
            base = np.clip(up, 0.0, 1.0)
        return name, pair, sr, base

    # tape recording is a process-wide switch; hold it off for every worker
    with no_grad(), ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(score, images))

    for name, pair, sr, base in results:
        row = ours.add(name, pair.hr, sr)
        logger.debug(f"{name}: psnr={row.psnr_db:.4f} ssim={row.ssim:.6f}")
        if base is not None:
            bicubic.add(name, pair.hr, base)
    ours.sort()
    bicubic.sort()
    return [ours, bicubic] if baseline else [ours]
