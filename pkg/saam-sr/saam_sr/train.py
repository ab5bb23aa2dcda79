"""Multi-scale training loop: one scale per batch, L1 + GV objective, Adam."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, cast

import numpy as np

from .checkpoint import save_checkpoint
from .config import parse_bool, parse_float, parse_int, parse_scale_list
from .data import CONTINUOUS_GRID, ImageArray, load_dataset, sample_batch
from .errors import ConfigError, NonFiniteLossError
from .losses import GV_REDUCTIONS, GvConfig, GvReduction, loss_terms
from .model import (
    ABLATION_PRESETS,
    Model,
    ModelConfig,
    build_model,
    forward,
    named_parameters,
    set_training,
)
from .optim import AdamHyper, AdamState, adam_step, gradients, zero_grads
from .saam_block import ScalePair

logger = logging.getLogger(__name__)

DEFAULT_SCALES = (ScalePair(2, 2), ScalePair(3, 3), ScalePair(4, 4))
# finite totals quoted when a run diverges
NAN_CONTEXT = 5

_MODEL_INT_KEYS = {
    "channels",
    "num_blocks",
    "insertion_period",
    "experts",
    "guidance_channels",
    "k_u",
    "d_u",
    "d_r",
    "d_b",
}
_MODEL_FLOAT_KEYS = {"simam_lambda", "max_scale"}
_MODEL_BOOL_KEYS = {"dense_layer", "variance_unbiased"}
_MODEL_STR_KEYS = {"norm_kind", "variant", "round_mode"}


@dataclass
class TrainConfig:
    data_dir: Path
    scales: list[ScalePair] = field(default_factory=lambda: list(DEFAULT_SCALES))
    continuous_scales: bool = False
    lr_patch: int = 32
    batch: int = 8
    steps: int = 2000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lambda_gv: float = 0.01
    seed: int = 0
    checkpoint_path: Path = Path("saam.ckpt")
    log_every: int = 50
    gv_window: int = 8
    gv_reduction: str = "norm"
    model: ModelConfig = field(default_factory=ModelConfig)

    @property
    def gv(self) -> GvConfig:
        return GvConfig(
            window=self.gv_window,
            lambda_gv=self.lambda_gv,
            reduction=cast(GvReduction, self.gv_reduction),
        )

    @property
    def adam(self) -> AdamHyper:
        return AdamHyper(lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps)

    @property
    def best_checkpoint_path(self) -> Path:
        return self.checkpoint_path.with_name(self.checkpoint_path.name + ".best")

    def validate(self) -> None:
        self.model.validate()
        if self.gv_reduction not in GV_REDUCTIONS:
            raise ConfigError("gv_reduction", f"unknown reduction '{self.gv_reduction}'")
        _ = self.gv, self.adam
        if self.steps < 0:
            raise ConfigError("steps", f"must be >= 0, got {self.steps}")
        if self.batch < 1:
            raise ConfigError("batch", f"must be >= 1, got {self.batch}")
        if self.log_every < 1:
            raise ConfigError("log_every", f"must be >= 1, got {self.log_every}")
        smallest = max(self.model.k_u, self.gv_window, 2)
        if self.lr_patch < smallest:
            raise ConfigError("lr_patch", f"must be >= {smallest}, got {self.lr_patch}")
        if not self.scales and not self.continuous_scales:
            raise ConfigError("scales", "at least one scale is required")
        grid_top = float(CONTINUOUS_GRID.max())
        if self.continuous_scales and grid_top > self.model.max_scale:
            raise ConfigError(
                "continuous_scales",
                f"grid reaches {grid_top:g}, above max_scale={self.model.max_scale:g}",
            )
        for scale in self.scales:
            try:
                scale.check(self.model.max_scale)
            except ValueError as e:
                raise ConfigError("scales", str(e)) from e

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> TrainConfig:
        """Build from parsed ``key=value`` pairs; unknown keys are errors."""
        if "data_dir" not in mapping:
            raise ConfigError("data_dir", "required")
        train: dict[str, Any] = {"data_dir": Path(mapping["data_dir"])}
        model: dict[str, Any] = {}
        for key, value in mapping.items():
            if key == "data_dir":
                continue
            if key == "scales":
                train[key] = parse_scale_list(value)
            elif key == "continuous_scales":
                train[key] = parse_bool(key, value)
            elif key in {"lr_patch", "batch", "steps", "log_every", "gv_window"}:
                train[key] = parse_int(key, value)
            elif key == "seed":
                train[key] = model[key] = parse_int(key, value)
            elif key in {"lr", "beta1", "beta2", "eps", "lambda_gv"}:
                train[key] = parse_float(key, value)
            elif key == "checkpoint_path":
                train[key] = Path(value)
            elif key == "gv_reduction":
                train[key] = value
            elif key in _MODEL_INT_KEYS:
                model[key] = parse_int(key, value)
            elif key in _MODEL_FLOAT_KEYS:
                model[key] = parse_float(key, value)
            elif key in _MODEL_BOOL_KEYS:
                model[key] = parse_bool(key, value)
            elif key in _MODEL_STR_KEYS:
                model[key] = value
            else:
                raise ConfigError(key, "unknown configuration key")
        cfg = cls(**train, model=ModelConfig(**model))
        cfg.validate()
        return cfg


def apply_preset(cfg: TrainConfig, name: str) -> TrainConfig:
    """Override the model keys with one of ``ABLATION_PRESETS``."""
    preset = ABLATION_PRESETS.get(name)
    if preset is None:
        known = ", ".join(ABLATION_PRESETS)
        raise ConfigError("preset", f"unknown preset '{name}' (known: {known})")
    cfg = dataclasses.replace(cfg, model=dataclasses.replace(cfg.model, **preset))
    cfg.validate()
    return cfg


def with_seed(cfg: TrainConfig, seed: int) -> TrainConfig:
    return dataclasses.replace(cfg, seed=seed, model=dataclasses.replace(cfg.model, seed=seed))


@dataclass
class LossRecord:
    step: int
    scale: ScalePair
    l1: float
    gv: float
    total: float

    def log_line(self) -> str:
        return (
            f"step={self.step} scale={self.scale} l1={self.l1:.6f} "
            f"gv={self.gv:.6f} total={self.total:.6f}"
        )


@dataclass
class TrainResult:
    model: Model
    losses: list[LossRecord]
    checkpoint_path: Path
    best_path: Path | None = None
    best_total: float = math.inf


def train(cfg: TrainConfig, dataset: list[ImageArray] | None = None) -> TrainResult:
    """sample -> forward -> L1 + GV -> backward -> Adam, for ``cfg.steps`` steps.

    The checkpoint at ``cfg.checkpoint_path`` holds the final weights; the
    weights that scored the lowest total are kept at ``<path>.best``.
    """
    cfg.validate()
    if dataset is None:
        dataset = load_dataset(cfg.data_dir)
    model = build_model(cfg.model)
    params = named_parameters(model)
    state = AdamState()
    hyper = cfg.adam
    gv_cfg = cfg.gv
    rng = np.random.default_rng(cfg.seed)
    result = TrainResult(model=model, losses=[], checkpoint_path=cfg.checkpoint_path)

    logger.info(
        f"training {cfg.steps} steps on {len(dataset)} images, "
        f"{sum(p.data.size for p in params.values())} parameters"
    )
    set_training(model, True)
    for step in range(1, cfg.steps + 1):
        lr, hr, scale = sample_batch(dataset, cfg, rng, model.dtype)
        terms = loss_terms(hr, forward(model, lr, scale), gv_cfg)
        record = LossRecord(
            step=step,
            scale=scale,
            l1=terms.l1.item(),
            gv=terms.gv.item(),
            total=terms.total.item(),
        )
        if not math.isfinite(record.total):
            tail = [r.total for r in result.losses[-NAN_CONTEXT:]]
            raise NonFiniteLossError(step, tail)
        result.losses.append(record)

        if record.total < result.best_total:
            result.best_total = record.total
            result.best_path = cfg.best_checkpoint_path
            save_checkpoint(model, result.best_path)

        terms.total.backward()
        adam_step(params, gradients(params), state, hyper)
        zero_grads(params)

        if step % cfg.log_every == 0 or step == cfg.steps:
            logger.info(record.log_line())

    set_training(model, False)
    save_checkpoint(model, cfg.checkpoint_path)
    logger.info(f"wrote {cfg.checkpoint_path}")
    return result
