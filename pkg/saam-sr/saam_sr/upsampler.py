"""Scale-aware upsampling: per-pixel predicted interpolation kernels at arbitrary
(r_v, r_h), followed by a 1×1 RGB reconstruction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from .errors import DimensionError, ScaleRangeError
from .functional import (
    ActivationKind,
    ConvSpec,
    activation,
    conv2d,
    dense,
    he_uniform,
    init_conv,
    neighborhood_blend,
    selection_matrix,
    softmax,
)
from .saam_block import MIN_SCALE, RoundMode, ScalePair, Variant, scaled_size
from .simam import SimamConfig, simam
from .tensor import Tensor

IntArray = npt.NDArray[np.intp]
RealArray = npt.NDArray[np.float64]


@dataclass
class CoordMap:
    """Center-aligned inverse mapping from output pixels to source coordinates."""

    out_h: int
    out_w: int
    src_v: RealArray
    src_h: RealArray
    frac_v: RealArray
    frac_h: RealArray
    base_v: IntArray
    base_h: IntArray


def _axis_coords(
    n_in: int, n_out: int, r: float
) -> tuple[RealArray, RealArray, IntArray]:
    src = (np.arange(n_out, dtype=np.float64) + 0.5) / r - 0.5
    clamped = np.clip(src, 0.0, n_in - 1)
    base = np.floor(clamped).astype(np.intp)
    return src, clamped - base, base


def map_coords(
    in_dims: tuple[int, int], scale: ScalePair, round_mode: RoundMode = "floor"
) -> CoordMap:
    """``src = (i + 0.5) / r - 0.5``; anchors and fractions use ``src`` clamped to
    ``[0, in - 1]``."""
    if scale.r_v < MIN_SCALE or scale.r_h < MIN_SCALE:
        msg = f"upsampling needs r >= {MIN_SCALE}, got {scale}"
        raise ScaleRangeError(msg)
    h, w = in_dims
    out_h = scaled_size(h, scale.r_v, round_mode)
    out_w = scaled_size(w, scale.r_h, round_mode)
    if out_h < 1 or out_w < 1:
        msg = f"output size {out_h}x{out_w} for input {h}x{w} at {scale}"
        raise DimensionError(msg)
    src_v, frac_v, base_v = _axis_coords(h, out_h, scale.r_v)
    src_h, frac_h, base_h = _axis_coords(w, out_w, scale.r_h)
    return CoordMap(out_h, out_w, src_v, src_h, frac_v, frac_h, base_v, base_h)


def neighbourhood_offsets(k_u: int) -> IntArray:
    """k_u = 4 gives {-1, 0, 1, 2} around the anchor."""
    return np.arange(k_u, dtype=np.intp) - (k_u - 1) // 2


def anchor_index(k_u: int) -> int:
    """Position of offset 0 inside the neighbourhood."""
    return (k_u - 1) // 2


@dataclass
class UpsamplerParams:
    feat: ConvSpec
    kpred_w1: Tensor
    kpred_b1: Tensor
    kpred_w2: Tensor
    kpred_b2: Tensor
    recon: ConvSpec
    k_u: int = 4
    act: ActivationKind = "silu"
    round_mode: RoundMode = "floor"
    simam_cfg: SimamConfig = field(default_factory=SimamConfig)

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        channels: int,
        *,
        k_u: int = 4,
        d_u: int = 32,
        variant: Variant = "tiny",
        round_mode: RoundMode = "floor",
        simam_cfg: SimamConfig | None = None,
        dtype: npt.DTypeLike = np.float32,
    ) -> UpsamplerParams:
        large = variant == "large"
        groups = 1 if large else channels
        return cls(
            feat=init_conv(rng, channels, channels, 3, groups=groups, dtype=dtype),
            kpred_w1=he_uniform(rng, (4, d_u), 4, dtype),
            kpred_b1=Tensor(np.zeros(d_u), requires_grad=True, dtype=dtype),
            kpred_w2=he_uniform(rng, (d_u, k_u * k_u), d_u * 6, dtype),
            kpred_b2=Tensor(np.zeros(k_u * k_u), requires_grad=True, dtype=dtype),
            recon=init_conv(rng, 3, channels, 1, dtype=dtype),
            k_u=k_u,
            act="relu" if large else "silu",
            round_mode=round_mode,
            simam_cfg=simam_cfg or SimamConfig(),
        )


def predict_kernels(
    coords: CoordMap, scale: ScalePair, params: UpsamplerParams
) -> Tensor:
    """Softmax-normalized k_u×k_u kernels for every output pixel, batched as one
    (P*Q, 4) dense pass: rows are (frac_v, frac_h, 1/r_v, 1/r_h)."""
    p, q, k = coords.out_h, coords.out_w, params.k_u
    inv_v, inv_h = scale.reciprocals()
    inputs = np.empty((p, q, 4), dtype=np.float64)
    inputs[:, :, 0] = coords.frac_v[:, None]
    inputs[:, :, 1] = coords.frac_h[None, :]
    inputs[:, :, 2] = inv_v
    inputs[:, :, 3] = inv_h
    x = Tensor(inputs.reshape(p * q, 4), dtype=params.kpred_w1.dtype)
    hidden = activation(dense(x, params.kpred_w1, params.kpred_b1), "silu")
    logits = dense(hidden, params.kpred_w2, params.kpred_b2)
    return softmax(logits).reshape(p, q, k, k)


def predict_kernel(
    frac_v: float, frac_h: float, scale: ScalePair, params: UpsamplerParams
) -> Tensor:
    """Single-pixel form of ``predict_kernels``."""
    coords = CoordMap(
        out_h=1,
        out_w=1,
        src_v=np.array([frac_v]),
        src_h=np.array([frac_h]),
        frac_v=np.array([frac_v]),
        frac_h=np.array([frac_h]),
        base_v=np.zeros(1, dtype=np.intp),
        base_h=np.zeros(1, dtype=np.intp),
    )
    return predict_kernels(coords, scale, params).reshape(params.k_u, params.k_u)


def gathers(base: IntArray, n_in: int, k_u: int, dtype: npt.DTypeLike) -> RealArray:
    """(k_u, n_out, n_in) one-hot gathers with edge-clamped indices."""
    offsets = neighbourhood_offsets(k_u)
    return np.stack(
        [selection_matrix(np.clip(base + o, 0, n_in - 1), n_in, dtype) for o in offsets]
    )


def upsample(
    features: Tensor,
    scale: ScalePair,
    params: UpsamplerParams,
    kernels: Tensor | None = None,
) -> Tensor:
    """feat conv -> SimAM -> activation -> per-pixel neighbourhood interpolation.

    ``kernels`` (out_h, out_w, k_u, k_u) overrides the predicted weights.
    """
    y = conv2d(features, params.feat)
    y = activation(simam(y, params.simam_cfg), params.act)
    return interpolate(y, scale, params, kernels)


def interpolate(
    y: Tensor,
    scale: ScalePair,
    params: UpsamplerParams,
    kernels: Tensor | None = None,
) -> Tensor:
    """Resample feature maps with the predicted per-pixel kernels."""
    h, w = y.shape[2], y.shape[3]
    k = params.k_u
    if h < k or w < k:
        msg = f"input {y.shape} smaller than the {k}x{k} neighbourhood"
        raise DimensionError(msg)
    coords = map_coords((h, w), scale, params.round_mode)
    weights = predict_kernels(coords, scale, params) if kernels is None else kernels
    row_sel = gathers(coords.base_v, h, k, y.dtype)
    col_sel = gathers(coords.base_h, w, k, y.dtype)
    return neighborhood_blend(y, row_sel, col_sel, weights)


def reconstruct(feat: Tensor, params: UpsamplerParams) -> Tensor:
    """1×1 conv to RGB; values are left unclamped for the loss."""
    if feat.ndim != 4 or feat.shape[1] != params.recon.in_channels:
        msg = (
            f"reconstruct expects {params.recon.in_channels} channels, "
            f"got {feat.shape}"
        )
        raise DimensionError(msg)
    return conv2d(feat, params.recon)
