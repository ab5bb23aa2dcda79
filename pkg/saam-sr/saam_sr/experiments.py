"""Desk-scale training runs that report how well a small model learns.

``learning_run`` overfits the training images and compares PSNR at ×2 against
bicubic. ``gv_comparison`` trains twice from the same seed, with and without
the gradient-variance term, and counts the images whose patch-variance gap
shrank.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass

import numpy as np

from .data import ImageArray
from .evaluate import degrade, evaluate, super_resolve
from .losses import GvConfig, gv_loss
from .model import Model, features
from .saam_block import ScalePair
from .tensor import Tensor, no_grad
from .train import TrainConfig, train

logger = logging.getLogger(__name__)

REPORT_SCALE = ScalePair(2, 2)


def training_set_l1(model: Model, images: list[ImageArray], scales: list[ScalePair]) -> float:
    """Mean |HR - SR| over every image at every scale, on whole images."""
    errors: list[float] = []
    for scale in scales:
        for hr in images:
            pair = degrade(hr, scale, max(model.config.k_u, 2))
            errors.append(float(np.mean(np.abs(pair.hr - super_resolve(model, pair.lr, scale)))))
    return float(np.mean(errors))


def image_gv_gaps(model: Model, images: list[ImageArray], scale: ScalePair = REPORT_SCALE) -> list[float]:
    """Per-image mean |V_HR - V_SR| of the Sobel-gradient patch variances."""
    cfg = GvConfig(reduction="norm")
    gaps: list[float] = []
    for hr in images:
        pair = degrade(hr, scale, max(model.config.k_u, 2))
        sr = super_resolve(model, pair.lr, scale)
        with no_grad():
            gap = gv_loss(Tensor(pair.hr[None]), Tensor(sr[None]), cfg)
        gaps.append(gap.item())
    return gaps


def scale_sensitivity(model: Model, lr: Tensor, a: ScalePair, b: ScalePair) -> float:
    """Largest change of the LR-size features when only the scale changes."""
    with no_grad():
        fa = features(model, lr, a).data
        fb = features(model, lr, b).data
    return float(np.max(np.abs(fa - fb)))


@dataclass
class LearningReport:
    final_l1: float
    psnr_saam: float
    psnr_bicubic: float
    seconds: float
    model: Model = dataclasses.field(repr=False, compare=False)

    @property
    def gain_db(self) -> float:
        return self.psnr_saam - self.psnr_bicubic

    def lines(self) -> list[str]:
        return [
            f"train-set L1      {self.final_l1:.6f}",
            f"PSNR x2 saam      {self.psnr_saam:.4f} dB",
            f"PSNR x2 bicubic   {self.psnr_bicubic:.4f} dB",
            f"gain              {self.gain_db:+.4f} dB",
            f"wall time         {self.seconds:.1f} s",
        ]


def learning_run(cfg: TrainConfig, images: list[ImageArray]) -> LearningReport:
    started = time.perf_counter()
    model = train(cfg, images).model
    seconds = time.perf_counter() - started
    named = [(f"train_{i:02d}", img) for i, img in enumerate(images)]
    ours, bicubic = evaluate(model, named, REPORT_SCALE, baseline=True)
    report = LearningReport(
        final_l1=training_set_l1(model, images, cfg.scales),
        psnr_saam=ours.mean_psnr,
        psnr_bicubic=bicubic.mean_psnr,
        seconds=seconds,
        model=model,
    )
    for line in report.lines():
        logger.info(line)
    return report


@dataclass
class GvComparison:
    with_gv: list[float]
    without_gv: list[float]

    @property
    def improved(self) -> int:
        return sum(a < b for a, b in zip(self.with_gv, self.without_gv, strict=True))

    @property
    def fraction_improved(self) -> float:
        return self.improved / len(self.with_gv) if self.with_gv else 0.0

    def lines(self) -> list[str]:
        rows = [
            f"image {i:02d}  gv={a:.6f}  no-gv={b:.6f}"
            for i, (a, b) in enumerate(zip(self.with_gv, self.without_gv, strict=True))
        ]
        rows.append(
            f"improved {self.improved}/{len(self.with_gv)} ({self.fraction_improved:.0%})"
        )
        return rows


def gv_comparison(cfg: TrainConfig, images: list[ImageArray], lambda_gv: float = 0.01) -> GvComparison:
    """Same seed and budget; only the gradient-variance weight differs."""
    runs: dict[float, list[float]] = {}
    for weight in (lambda_gv, 0.0):
        run_cfg = dataclasses.replace(
            cfg,
            lambda_gv=weight,
            checkpoint_path=cfg.checkpoint_path.with_name(
                f"{cfg.checkpoint_path.name}.gv{weight:g}"
            ),
        )
        runs[weight] = image_gv_gaps(train(run_cfg, images).model, images)
    comparison = GvComparison(with_gv=runs[lambda_gv], without_gv=runs[0.0])
    for line in comparison.lines():
        logger.info(line)
    return comparison
