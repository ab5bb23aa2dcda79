"""Compact residual SR backbone with SAAM blocks every K residual units and the
scale-aware upsampler as its tail."""

from __future__ import annotations

import dataclasses
from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt

from .errors import ConfigError, DimensionError
from .functional import ConvSpec, activation, conv2d, init_conv
from .saam_block import (
    MAX_SCALE,
    NormKind,
    RoundMode,
    SaamBlockParams,
    ScalePair,
    Variant,
    saam_forward,
)
from .simam import BatchNorm2d, SimamConfig
from .tensor import Tensor
from .upsampler import UpsamplerParams, reconstruct, upsample


@dataclass
class ModelConfig:
    """Architecture knobs; the ablation axes are ``experts``, ``dense_layer`` and
    ``norm_kind``."""

    channels: int = 16
    num_blocks: int = 4
    insertion_period: int = 2
    experts: int = 16
    dense_layer: bool = True
    norm_kind: NormKind = "simam"
    variant: Variant = "tiny"
    guidance_channels: int = 1
    k_u: int = 4
    d_u: int = 32
    d_r: int = 16
    d_b: int = 8
    round_mode: RoundMode = "floor"
    simam_lambda: float = 1e-4
    variance_unbiased: bool = False
    max_scale: float = MAX_SCALE
    seed: int = 0

    def validate(self) -> None:
        if self.channels < 4:
            raise ConfigError("channels", f"must be >= 4, got {self.channels}")
        if self.num_blocks < 1:
            raise ConfigError("num_blocks", f"must be >= 1, got {self.num_blocks}")
        if not 1 <= self.insertion_period <= self.num_blocks:
            raise ConfigError(
                "insertion_period",
                f"must be in [1, num_blocks={self.num_blocks}], got {self.insertion_period}",
            )
        if self.experts < 1:
            raise ConfigError("experts", f"must be >= 1, got {self.experts}")
        if self.norm_kind not in ("simam", "batchnorm"):
            raise ConfigError("norm_kind", f"unknown kind '{self.norm_kind}'")
        if self.variant not in ("tiny", "large"):
            raise ConfigError("variant", f"unknown variant '{self.variant}'")
        if self.guidance_channels not in (1, self.channels):
            raise ConfigError(
                "guidance_channels", f"must be 1 or channels, got {self.guidance_channels}"
            )
        if self.round_mode not in ("floor", "round"):
            raise ConfigError("round_mode", f"unknown mode '{self.round_mode}'")
        for name in ("k_u", "d_u", "d_r", "d_b"):
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be >= 1, got {getattr(self, name)}")
        if self.simam_lambda <= 0:
            raise ConfigError("simam_lambda", f"must be > 0, got {self.simam_lambda}")
        if self.max_scale < 1:
            raise ConfigError("max_scale", f"must be >= 1, got {self.max_scale}")

    @property
    def num_saam_blocks(self) -> int:
        return self.num_blocks // self.insertion_period

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ModelConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown model configuration key")
        return cls(**data)


# Table-style ablation arms: normalization in the hourglass, experts, dense layer.
ABLATION_PRESETS: dict[str, dict[str, Any]] = {
    "BN-4": {"norm_kind": "batchnorm", "experts": 4, "dense_layer": True},
    "SA-4": {"norm_kind": "simam", "experts": 4, "dense_layer": True},
    "SA-16": {"norm_kind": "simam", "experts": 16, "dense_layer": True},
    "SA-16-no-dense": {"norm_kind": "simam", "experts": 16, "dense_layer": False},
    "SA-64": {"norm_kind": "simam", "experts": 64, "dense_layer": True},
}


@dataclass
class ResidualBlock:
    conv1: ConvSpec
    conv2: ConvSpec


@dataclass
class Model:
    config: ModelConfig
    head: ConvSpec
    blocks: list[ResidualBlock]
    saam_blocks: list[SaamBlockParams]
    upsampler: UpsamplerParams
    dtype: np.dtype[Any] = field(default_factory=lambda: np.dtype(np.float32))


def build_model(cfg: ModelConfig, dtype: npt.DTypeLike = np.float32) -> Model:
    """Deterministic initialization from ``cfg.seed``."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    c = cfg.channels
    simam_cfg = SimamConfig(cfg.simam_lambda, cfg.variance_unbiased)
    head = init_conv(rng, c, 3, 3, dtype=dtype)
    blocks = [
        ResidualBlock(
            conv1=init_conv(rng, c, c, 3, dtype=dtype),
            conv2=init_conv(rng, c, c, 3, dtype=dtype),
        )
        for _ in range(cfg.num_blocks)
    ]
    saam_blocks = [
        SaamBlockParams.create(
            rng,
            c,
            experts=cfg.experts,
            d_r=cfg.d_r,
            d_b=cfg.d_b,
            dense_layer=cfg.dense_layer,
            variant=cfg.variant,
            norm_kind=cfg.norm_kind,
            guidance_channels=cfg.guidance_channels,
            simam_cfg=simam_cfg,
            dtype=dtype,
        )
        for _ in range(cfg.num_saam_blocks)
    ]
    upsampler = UpsamplerParams.create(
        rng,
        c,
        k_u=cfg.k_u,
        d_u=cfg.d_u,
        variant=cfg.variant,
        round_mode=cfg.round_mode,
        simam_cfg=simam_cfg,
        dtype=dtype,
    )
    return Model(cfg, head, blocks, saam_blocks, upsampler, np.dtype(dtype))


def features(
    model: Model, lr: Tensor, scale: ScalePair, bypass_saam: bool = False
) -> Tensor:
    """head -> residual blocks with SAAM every K -> global skip, at LR size."""
    if lr.ndim != 4 or lr.shape[1] != 3:
        msg = f"expected an (N, 3, h, w) image batch, got {lr.shape}"
        raise DimensionError(msg)
    cfg = model.config
    head = conv2d(lr, model.head)
    x = head
    inserted = 0
    for i, block in enumerate(model.blocks, start=1):
        x = x + conv2d(activation(conv2d(x, block.conv1), "silu"), block.conv2)
        if i % cfg.insertion_period == 0 and inserted < len(model.saam_blocks):
            if not bypass_saam:
                x = saam_forward(x, scale, model.saam_blocks[inserted], None, cfg.max_scale)
            inserted += 1
    return x + head


def forward(
    model: Model, lr: Tensor, scale: ScalePair, bypass_saam: bool = False
) -> Tensor:
    """``features`` -> upsample -> RGB."""
    x = features(model, lr, scale, bypass_saam)
    return reconstruct(upsample(x, scale, model.upsampler), model.upsampler)


# ---------------------------------------------------------------------------
# Parameter audit
# ---------------------------------------------------------------------------


def named_tensors(obj: Any, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
    """Every tensor reachable through dataclass fields and lists, in field order."""
    if isinstance(obj, Tensor):
        yield prefix, obj
    elif dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        for f in dataclasses.fields(obj):
            name = f"{prefix}.{f.name}" if prefix else f.name
            yield from named_tensors(getattr(obj, f.name), name)
    elif isinstance(obj, list | tuple):
        for i, item in enumerate(obj):
            yield from named_tensors(item, f"{prefix}.{i}")


def named_parameters(model: Model) -> dict[str, Tensor]:
    return {n: t for n, t in named_tensors(model) if t.requires_grad}


def named_buffers(model: Model) -> dict[str, Tensor]:
    return {n: t for n, t in named_tensors(model) if not t.requires_grad}


def _batchnorms(obj: Any) -> Iterator[BatchNorm2d]:
    if isinstance(obj, BatchNorm2d):
        yield obj
    elif dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        for f in dataclasses.fields(obj):
            yield from _batchnorms(getattr(obj, f.name))
    elif isinstance(obj, list | tuple):
        for item in obj:
            yield from _batchnorms(item)


def set_training(model: Model, training: bool) -> None:
    """Batch-norm slots use batch statistics when training, running ones otherwise."""
    for bn in _batchnorms(model):
        bn.training = training


@dataclass
class ParamCount:
    total: int
    breakdown: dict[str, int]

    def format(self) -> str:
        width = max(len(k) for k in self.breakdown)
        lines = [f"{k.ljust(width)}  {v:>8,}" for k, v in self.breakdown.items()]
        lines.append(f"{'total'.ljust(width)}  {self.total:>8,}")
        return "\n".join(lines)


def _count(obj: Any) -> int:
    return sum(t.data.size for _, t in named_tensors(obj) if t.requires_grad)


def param_count(model: Model) -> ParamCount:
    """Trainable values per component; SimAM slots always contribute zero."""
    breakdown = {
        "backbone": _count(model.head) + _count(model.blocks),
        "saam_hourglass": sum(_count(b.hourglass) for b in model.saam_blocks),
        "saam_expert_bank": sum(_count(b.bank) for b in model.saam_blocks),
        "saam_pointwise": sum(_count(b.pointwise) for b in model.saam_blocks),
        "upsampler": _count(model.upsampler),
        "simam": 0,
    }
    return ParamCount(total=sum(breakdown.values()), breakdown=breakdown)
