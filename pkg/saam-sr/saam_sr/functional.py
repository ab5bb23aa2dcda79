"""Differentiable layer ops built on ``Tensor``: convolution, activations, softmax, dense
maps and matrix-driven resampling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ArgumentError, DimensionError
from .tensor import Array, Tensor

ActivationKind = Literal["silu", "sigmoid", "relu"]


@dataclass
class ConvSpec:
    """Kernel (C_out, C_in/groups, k, k), optional bias (C_out,), zero padding."""

    kernel: Tensor
    bias: Tensor | None = None
    stride: int = 1
    padding: int = 0
    groups: int = 1

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1] * self.groups

    @property
    def kernel_size(self) -> int:
        return self.kernel.shape[2]


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------


def _strided(xp: Array, u: int, v: int, stride: int, ho: int, wo: int) -> Array:
    """The (Ho, Wo) grid of padded-input samples under kernel tap (u, v)."""
    return xp[
        :,
        :,
        u : u + stride * (ho - 1) + 1 : stride,
        v : v + stride * (wo - 1) + 1 : stride,
    ]


def _im2col(xp: Array, k: int, stride: int, groups: int, ho: int, wo: int) -> Array:
    """(N, C, Hp, Wp) -> (G, N*Ho*Wo, C/G*k*k) patch matrix, one per group."""
    n, c = xp.shape[:2]
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    win = win.reshape(n, groups, c // groups, ho, wo, k, k)
    return win.transpose(1, 0, 3, 4, 2, 5, 6).reshape(groups, n * ho * wo, -1)


def _conv2d_forward(
    xp: Array, kernel: Array, stride: int, groups: int
) -> tuple[Array, Array]:
    """Output plus the array the backward pass reads: the padded input when every
    group has a single input channel, the patch matrix otherwise."""
    c_out, c_in_g, k, _ = kernel.shape
    n, _, hp, wp = xp.shape
    ho = (hp - k) // stride + 1
    wo = (wp - k) // stride + 1
    per_group = c_out // groups
    if c_in_g == 1:
        # shifted multiply-accumulate, one tap at a time
        wg = kernel.reshape(groups, per_group, k, k)
        out = np.zeros(
            (n, groups, per_group, ho, wo), dtype=np.result_type(xp.dtype, kernel.dtype)
        )
        for u in range(k):
            for v in range(k):
                tap = wg[None, :, :, u, v, None, None]
                out += _strided(xp, u, v, stride, ho, wo)[:, :, None] * tap
        return out.reshape(n, c_out, ho, wo), xp
    cols = _im2col(xp, k, stride, groups, ho, wo)
    wg = kernel.reshape(groups, per_group, c_in_g * k * k)
    out = np.matmul(cols, wg.transpose(0, 2, 1))
    out = out.reshape(groups, n, ho, wo, per_group).transpose(1, 0, 4, 2, 3)
    return out.reshape(n, c_out, ho, wo), cols


def _conv2d_backward(
    g: Array,
    saved: Array,
    kernel: Array,
    xp_shape: tuple[int, ...],
    stride: int,
    groups: int,
) -> tuple[Array, Array]:
    """Gradients w.r.t. the padded input and the kernel."""
    c_out, c_in_g, k, _ = kernel.shape
    n, _, ho, wo = g.shape
    per_group = c_out // groups
    gxp = np.zeros(xp_shape, dtype=g.dtype)
    h_span = stride * (ho - 1) + 1
    w_span = stride * (wo - 1) + 1

    if c_in_g == 1:
        gg = g.reshape(n, groups, per_group, ho, wo)
        wg = kernel.reshape(groups, per_group, k, k)
        gw = np.empty((groups, per_group, k, k), dtype=g.dtype)
        for u in range(k):
            for v in range(k):
                sampled = _strided(saved, u, v, stride, ho, wo)[:, :, None]
                gw[:, :, u, v] = (gg * sampled).sum(axis=(0, 3, 4))
                tap = wg[None, :, :, u, v, None, None]
                gxp[:, :, u : u + h_span : stride, v : v + w_span : stride] += (
                    gg * tap
                ).sum(axis=2)
        return gxp, gw.reshape(kernel.shape)

    gg = g.reshape(n, groups, per_group, ho, wo).transpose(1, 0, 3, 4, 2)
    gg = gg.reshape(groups, n * ho * wo, per_group)
    wg = kernel.reshape(groups, per_group, c_in_g * k * k)
    gw = np.matmul(gg.transpose(0, 2, 1), saved).reshape(kernel.shape)
    dcols = np.matmul(gg, wg).reshape(groups, n, ho, wo, c_in_g, k, k)
    dcols = dcols.transpose(1, 0, 4, 2, 3, 5, 6).reshape(n, groups * c_in_g, ho, wo, k, k)
    for u in range(k):
        for v in range(k):
            gxp[:, :, u : u + h_span : stride, v : v + w_span : stride] += dcols[
                ..., u, v
            ]
    return gxp, gw


def conv2d(x: Tensor, spec: ConvSpec) -> Tensor:
    """Grouped 2-D cross-correlation with zero padding."""
    kernel = spec.kernel
    if x.ndim != 4 or kernel.ndim != 4:
        msg = f"conv2d needs rank-4 input and kernel, got {x.shape} and {kernel.shape}"
        raise DimensionError(msg)
    n, c, h, w = x.shape
    c_out, c_in_g, k, k2 = kernel.shape
    g, s, p = spec.groups, spec.stride, spec.padding
    if k != k2 or c_in_g * g != c or c_out % g != 0 or c % g != 0:
        msg = f"input {x.shape} does not match kernel {kernel.shape} with groups={g}"
        raise DimensionError(msg)
    ho = (h + 2 * p - k) // s + 1
    wo = (w + 2 * p - k) // s + 1
    if ho < 1 or wo < 1:
        msg = f"input {x.shape} too small for kernel {kernel.shape} (pad {p}, stride {s})"
        raise DimensionError(msg)
    bias = spec.bias
    if bias is not None and bias.shape != (c_out,):
        msg = f"bias shape {bias.shape} does not match kernel {kernel.shape}"
        raise DimensionError(msg)

    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p))) if p else x.data
    out, saved = _conv2d_forward(xp, kernel.data, s, g)
    if bias is not None:
        out = out + bias.data.reshape(1, c_out, 1, 1)
    kernel_data = kernel.data
    xp_shape = xp.shape

    def backward(grad: Array) -> list[Array | None]:
        gxp, gw = _conv2d_backward(grad, saved, kernel_data, xp_shape, s, g)
        gx = gxp[:, :, p : p + h, p : p + w]
        grads: list[Array | None] = [gx, gw]
        if bias is not None:
            grads.append(grad.sum(axis=(0, 2, 3)))
        return grads

    parents = [x, kernel] if bias is None else [x, kernel, bias]
    return Tensor.from_op(np.ascontiguousarray(out), parents, backward, "conv2d")


# ---------------------------------------------------------------------------
# Activations and normalization of weights
# ---------------------------------------------------------------------------


def _sigmoid(a: Array) -> Array:
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def activation(x: Tensor, kind: ActivationKind) -> Tensor:
    """Elementwise SiLU, sigmoid or ReLU."""
    a = x.data
    if kind == "sigmoid":
        s = _sigmoid(a)
        return Tensor.from_op(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")
    if kind == "silu":
        s = _sigmoid(a)
        return Tensor.from_op(
            a * s, (x,), lambda g: (g * (s + a * s * (1.0 - s)),), "silu"
        )
    if kind == "relu":
        mask = (a > 0).astype(a.dtype)
        return Tensor.from_op(a * mask, (x,), lambda g: (g * mask,), "relu")
    msg = f"unknown activation '{kind}'"
    raise ArgumentError(msg)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-shifted softmax along ``axis``."""
    if x.data.size == 0 or x.shape[axis] == 0:
        msg = "softmax of an empty vector"
        raise ArgumentError(msg)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g: Array) -> tuple[Array]:
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return Tensor.from_op(s, (x,), backward, "softmax")


def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Row-wise affine map: (m, k) @ (k, n) + (n,)."""
    out = x @ weight
    if bias is not None:
        out = out + bias.reshape(1, bias.shape[0])
    return out


# ---------------------------------------------------------------------------
# Matrix-driven resampling
# ---------------------------------------------------------------------------


def selection_matrix(
    indices: npt.NDArray[np.intp], in_size: int, dtype: npt.DTypeLike
) -> Array:
    """One-hot rows: ``m[i, indices[i]] = 1``."""
    m = np.zeros((len(indices), in_size), dtype=dtype)
    m[np.arange(len(indices)), indices] = 1.0
    return m


def separable_map(x: Tensor, rows: Array, cols: Array) -> Tensor:
    """Apply fixed linear maps along H and W: ``rows @ x @ cols.T``."""
    if x.ndim != 4 or rows.shape[1] != x.shape[2] or cols.shape[1] != x.shape[3]:
        msg = f"separable_map: input {x.shape} vs maps {rows.shape}, {cols.shape}"
        raise DimensionError(msg)
    rows = rows.astype(x.dtype, copy=False)
    cols = cols.astype(x.dtype, copy=False)
    out = np.matmul(np.matmul(rows, x.data), cols.T)

    def backward(g: Array) -> tuple[Array]:
        return (np.matmul(np.matmul(rows.T, g), cols),)

    return Tensor.from_op(out, (x,), backward, "separable_map")


def nearest_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Nearest-neighbour resize to an explicit output size."""
    h, w = x.shape[2], x.shape[3]
    rows = selection_matrix((np.arange(out_h) * h) // out_h, h, x.dtype)
    cols = selection_matrix((np.arange(out_w) * w) // out_w, w, x.dtype)
    return separable_map(x, rows, cols)


def neighborhood_blend(
    feat: Tensor, row_sel: Array, col_sel: Array, weights: Tensor
) -> Tensor:
    """Per-output-pixel weighted sum over a k×k gathered neighbourhood.

    ``row_sel`` (k, P, H) and ``col_sel`` (k, Q, W) are one-hot gathers for each
    neighbourhood offset; ``weights`` (P, Q, k, k) is shared across channels.
    """
    k = row_sel.shape[0]
    n, c, h, w = feat.shape
    p, q = row_sel.shape[1], col_sel.shape[1]
    if (
        row_sel.shape[2] != h
        or col_sel.shape[2] != w
        or col_sel.shape[0] != k
        or weights.shape != (p, q, k, k)
    ):
        msg = (
            f"neighborhood_blend: feature {feat.shape}, gathers {row_sel.shape} "
            f"{col_sel.shape}, weights {weights.shape}"
        )
        raise DimensionError(msg)
    dtype = feat.dtype
    row_sel = row_sel.astype(dtype, copy=False)
    col_sel = col_sel.astype(dtype, copy=False)
    x, wts = feat.data, weights.data
    out = np.zeros((n, c, p, q), dtype=dtype)
    for a in range(k):
        rows_a = np.matmul(row_sel[a], x)
        for b in range(k):
            out += np.matmul(rows_a, col_sel[b].T) * wts[:, :, a, b]

    def backward(g: Array) -> tuple[Array, Array]:
        gx = np.zeros_like(x)
        gw = np.zeros_like(wts)
        for a in range(k):
            rows_a = np.matmul(row_sel[a], x)
            acc = np.zeros((n, c, p, w), dtype=dtype)
            for b in range(k):
                sampled = np.matmul(rows_a, col_sel[b].T)
                gw[:, :, a, b] = (g * sampled).sum(axis=(0, 1))
                acc += np.matmul(g * wts[:, :, a, b], col_sel[b])
            gx += np.matmul(row_sel[a].T, acc)
        return gx, gw

    return Tensor.from_op(out, (feat, weights), backward, "neighborhood_blend")


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def he_uniform(
    rng: np.random.Generator,
    shape: tuple[int, ...],
    fan_in: int,
    dtype: npt.DTypeLike = np.float32,
) -> Tensor:
    """Trainable tensor drawn from U(-sqrt(6/fan_in), sqrt(6/fan_in))."""
    bound = float(np.sqrt(6.0 / fan_in))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, dtype=dtype)


def init_conv(
    rng: np.random.Generator,
    c_out: int,
    c_in: int,
    k: int,
    *,
    groups: int = 1,
    stride: int = 1,
    bias: bool = True,
    zero: bool = False,
    dtype: npt.DTypeLike = np.float32,
) -> ConvSpec:
    """He-uniform (or all-zero) conv with "same" zero padding."""
    shape = (c_out, c_in // groups, k, k)
    if zero:
        kernel = Tensor(np.zeros(shape), requires_grad=True, dtype=dtype)
    else:
        kernel = he_uniform(rng, shape, (c_in // groups) * k * k, dtype)
    b = Tensor(np.zeros(c_out), requires_grad=True, dtype=dtype) if bias else None
    return ConvSpec(kernel=kernel, bias=b, stride=stride, padding=k // 2, groups=groups)
