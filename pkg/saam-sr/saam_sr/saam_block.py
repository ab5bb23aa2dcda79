"""SAAM plug-in block: guidance hourglass, scale-aware expert convolution and gated
residual fusion ``F' = F + F_adpt * M``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt

from .errors import ArgumentError, ConfigError, DimensionError, ScaleRangeError
from .functional import (
    ActivationKind,
    ConvSpec,
    activation,
    conv2d,
    dense,
    he_uniform,
    init_conv,
    nearest_resize,
    softmax,
)
from .simam import BatchNorm2d, NormSlot, SimamConfig, apply_norm
from .tensor import Tensor

MIN_SCALE = 1.0
MAX_SCALE = 4.5

Variant = Literal["tiny", "large"]
NormKind = Literal["simam", "batchnorm"]
RoundMode = Literal["floor", "round"]

# absorbs representation error in products like 100 * 1.15
SIZE_TOLERANCE = 1e-9


def scaled_size(n: int, r: float, round_mode: RoundMode = "floor") -> int:
    """Output length for magnifying ``n`` samples by ``r``."""
    if round_mode == "round":
        return round(n * r)
    return math.floor(n * r + SIZE_TOLERANCE)


@dataclass(frozen=True)
class ScalePair:
    """Vertical and horizontal magnification factors."""

    r_v: float
    r_h: float

    @classmethod
    def uniform(cls, r: float) -> ScalePair:
        return cls(r, r)

    def check(self, max_scale: float = MAX_SCALE) -> None:
        for axis, r in (("r_v", self.r_v), ("r_h", self.r_h)):
            if r < MIN_SCALE:
                msg = f"{axis}={r} below lower bound {MIN_SCALE}"
                raise ScaleRangeError(msg)
            if r > max_scale:
                msg = f"{axis}={r} above upper bound {max_scale}"
                raise ScaleRangeError(msg)

    def reciprocals(self) -> tuple[float, float]:
        return 1.0 / self.r_v, 1.0 / self.r_h

    @property
    def max(self) -> float:
        return max(self.r_v, self.r_h)

    def __str__(self) -> str:
        return f"{self.r_v:g}x{self.r_h:g}"


# ---------------------------------------------------------------------------
# Expert bank
# ---------------------------------------------------------------------------


def compressing_basis_dim(experts: int, kernel_numel: int, requested: int) -> int:
    """Largest basis dim <= ``requested`` that stores fewer values than the raw bank."""
    limit = (experts * kernel_numel - 1) // (experts + kernel_numel)
    return min(requested, limit)


@dataclass
class ExpertBank:
    """E kernel experts, stored raw or as coefficients over a shared basis."""

    kernel_shape: tuple[int, int, int, int]
    routing_w1: Tensor
    routing_b1: Tensor
    routing_w2: Tensor
    routing_b2: Tensor
    experts: Tensor | None = None
    coeffs: Tensor | None = None
    basis: Tensor | None = None

    @property
    def num_experts(self) -> int:
        return self.routing_w2.shape[1]

    @property
    def dense_layer(self) -> bool:
        return self.basis is not None

    @property
    def depthwise(self) -> bool:
        return self.kernel_shape[1] == 1

    @property
    def channels(self) -> int:
        return self.kernel_shape[0]

    def expert_table(self) -> Tensor:
        """All experts as an (E, kernel_numel) matrix."""
        if self.coeffs is not None and self.basis is not None:
            return self.coeffs @ self.basis
        if self.experts is None:
            msg = "expert bank has neither raw experts nor a basis"
            raise ArgumentError(msg)
        return self.experts.reshape(self.num_experts, -1)

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        channels: int,
        *,
        experts: int = 16,
        kernel_size: int = 3,
        d_r: int = 16,
        d_b: int = 8,
        dense_layer: bool = True,
        full: bool = False,
        zero_experts: bool = False,
        dtype: npt.DTypeLike = np.float32,
    ) -> ExpertBank:
        if experts < 1:
            raise ConfigError("experts", f"must be >= 1, got {experts}")
        c_in = channels if full else 1
        shape = (channels, c_in, kernel_size, kernel_size)
        numel = int(np.prod(shape))
        fan_in = c_in * kernel_size * kernel_size

        bank = cls(
            kernel_shape=shape,
            routing_w1=he_uniform(rng, (2, d_r), 2, dtype),
            routing_b1=Tensor(np.zeros(d_r), requires_grad=True, dtype=dtype),
            routing_w2=he_uniform(rng, (d_r, experts), d_r * 6, dtype),
            routing_b2=Tensor(np.zeros(experts), requires_grad=True, dtype=dtype),
        )
        if dense_layer:
            dim = compressing_basis_dim(experts, numel, d_b)
            if dim < 1:
                raise ConfigError(
                    "dense_layer",
                    f"no compressing basis exists for {experts} experts of {numel} values",
                )
            bank.basis = he_uniform(rng, (dim, numel), fan_in, dtype)
            if zero_experts:
                bank.coeffs = Tensor(
                    np.zeros((experts, dim)), requires_grad=True, dtype=dtype
                )
            else:
                bank.coeffs = he_uniform(rng, (experts, dim), 2 * dim, dtype)
        elif zero_experts:
            bank.experts = Tensor(
                np.zeros((experts, *shape)), requires_grad=True, dtype=dtype
            )
        else:
            bank.experts = he_uniform(rng, (experts, *shape), fan_in, dtype)
        return bank


def routing_weights(
    scale: ScalePair, bank: ExpertBank, max_scale: float = MAX_SCALE
) -> Tensor:
    """(1/r_v, 1/r_h) -> dense -> SiLU -> dense -> softmax over the E experts."""
    scale.check(max_scale)
    feats = Tensor(np.array([scale.reciprocals()]), dtype=bank.routing_w1.dtype)
    hidden = activation(dense(feats, bank.routing_w1, bank.routing_b1), "silu")
    logits = dense(hidden, bank.routing_w2, bank.routing_b2)
    return softmax(logits).reshape(bank.num_experts)


def blend_experts(bank: ExpertBank, w: Tensor) -> Tensor:
    """``sum_e w_e * expert_e`` reshaped to the bank's kernel shape."""
    e = bank.num_experts
    if w.shape != (e,):
        msg = f"blend weights have shape {w.shape}, bank has {e} experts"
        raise ArgumentError(msg)
    table = bank.expert_table()
    return (w.reshape(1, e) @ table).reshape(*bank.kernel_shape)


def scale_aware_conv(
    features: Tensor,
    scale: ScalePair,
    bank: ExpertBank,
    pointwise: ConvSpec | None,
    max_scale: float = MAX_SCALE,
) -> Tensor:
    """Dynamic convolution with the scale-blended kernel.

    Depthwise banks are followed by the 1×1 ``pointwise`` merge; full banks
    (large variant) convolve across channels directly.
    """
    c = bank.channels
    if features.ndim != 4 or features.shape[1] != c:
        msg = f"features {features.shape} do not have the bank's {c} channels"
        raise DimensionError(msg)
    kernel = blend_experts(bank, routing_weights(scale, bank, max_scale))
    k = bank.kernel_shape[2]
    groups = c if bank.depthwise else 1
    out = conv2d(features, ConvSpec(kernel=kernel, padding=k // 2, groups=groups))
    if pointwise is not None:
        out = conv2d(out, pointwise)
    return out


# ---------------------------------------------------------------------------
# Guidance hourglass
# ---------------------------------------------------------------------------


@dataclass
class Hourglass:
    """conv(stride 2) -> norm -> act -> conv -> norm -> act -> NN up -> conv -> sigmoid."""

    down: ConvSpec
    bottleneck: ConvSpec
    up: ConvSpec
    norm_down: NormSlot
    norm_bottleneck: NormSlot
    act: ActivationKind = "silu"

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        channels: int,
        *,
        guidance_channels: int = 1,
        norm_kind: NormKind = "simam",
        simam_cfg: SimamConfig | None = None,
        act: ActivationKind = "silu",
        dtype: npt.DTypeLike = np.float32,
    ) -> Hourglass:
        mid = max(channels // 2, 4)
        down = init_conv(rng, mid, channels, 3, dtype=dtype)
        down.stride = 2
        norms: list[NormSlot] = []
        for _ in range(2):
            if norm_kind == "batchnorm":
                norms.append(BatchNorm2d.create(mid, dtype))
            else:
                norms.append(simam_cfg or SimamConfig())
        return cls(
            down=down,
            bottleneck=init_conv(rng, mid, mid, 3, dtype=dtype),
            up=init_conv(rng, guidance_channels, mid, 3, dtype=dtype),
            norm_down=norms[0],
            norm_bottleneck=norms[1],
            act=act,
        )


def guidance_map(features: Tensor, hourglass: Hourglass) -> Tensor:
    """Gate M in (0, 1) at the input's exact spatial size."""
    h, w = features.shape[2], features.shape[3]
    if h < 2 or w < 2:
        msg = f"guidance map needs H, W >= 2, got {features.shape}"
        raise DimensionError(msg)
    y = conv2d(features, hourglass.down)
    y = activation(apply_norm(y, hourglass.norm_down), hourglass.act)
    y = conv2d(y, hourglass.bottleneck)
    y = activation(apply_norm(y, hourglass.norm_bottleneck), hourglass.act)
    y = nearest_resize(y, h, w)
    return activation(conv2d(y, hourglass.up), "sigmoid")


# ---------------------------------------------------------------------------
# Block
# ---------------------------------------------------------------------------


@dataclass
class SaamBlockParams:
    hourglass: Hourglass
    bank: ExpertBank
    pointwise: ConvSpec | None

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        channels: int,
        *,
        experts: int = 16,
        d_r: int = 16,
        d_b: int = 8,
        dense_layer: bool = True,
        variant: Variant = "tiny",
        norm_kind: NormKind = "simam",
        guidance_channels: int = 1,
        simam_cfg: SimamConfig | None = None,
        dtype: npt.DTypeLike = np.float32,
    ) -> SaamBlockParams:
        """Safe-initialized block: the adapted branch starts at exactly zero."""
        large = variant == "large"
        hourglass = Hourglass.create(
            rng,
            channels,
            guidance_channels=guidance_channels,
            norm_kind=norm_kind,
            simam_cfg=simam_cfg,
            act="relu" if large else "silu",
            dtype=dtype,
        )
        bank = ExpertBank.create(
            rng,
            channels,
            experts=experts,
            d_r=d_r,
            d_b=d_b,
            dense_layer=dense_layer,
            full=large,
            zero_experts=large,
            dtype=dtype,
        )
        pointwise = (
            None if large else init_conv(rng, channels, channels, 1, zero=True, dtype=dtype)
        )
        return cls(hourglass=hourglass, bank=bank, pointwise=pointwise)


def saam_forward(
    features: Tensor,
    scale: ScalePair,
    params: SaamBlockParams,
    guidance: Tensor | None = None,
    max_scale: float = MAX_SCALE,
) -> Tensor:
    """``F' = F + F_adpt * M``; ``guidance`` overrides the hourglass output."""
    gate = guidance_map(features, params.hourglass) if guidance is None else guidance
    adapted = scale_aware_conv(features, scale, params.bank, params.pointwise, max_scale)
    return features + adapted * gate
