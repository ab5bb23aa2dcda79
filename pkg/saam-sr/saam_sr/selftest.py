"""Runtime invariant suites behind the ``gradcheck`` and ``selftest`` commands."""

from __future__ import annotations

import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .functional import (
    ConvSpec,
    activation,
    conv2d,
    dense,
    nearest_resize,
    neighborhood_blend,
    softmax,
)
from .gradcheck import finite_diff_check
from .losses import (
    GvConfig,
    GvReduction,
    loss_terms,
    rgb_to_gray,
    sobel_gradients,
    total_loss,
)
from .metrics import psnr
from .model import Model, ModelConfig, build_model, forward
from .resample import Direction, bicubic_resample
from .saam_block import (
    NormKind,
    SaamBlockParams,
    ScalePair,
    routing_weights,
    saam_forward,
    scale_aware_conv,
    scaled_size,
)
from .simam import BatchNorm2d, SimamConfig, simam
from .tensor import Tensor, no_grad
from .upsampler import (
    UpsamplerParams,
    gathers,
    interpolate,
    map_coords,
    predict_kernels,
    reconstruct,
    upsample,
)

GRAD_TOLERANCE = 1e-4
ORACLE_TOLERANCE = 1e-5
IDENTITY_TOLERANCE = 1e-6
UNITY_TOLERANCE = 1e-5
PSNR_TOLERANCE = 1e-2

EVAL_SCALES = (1.2, 1.5, 1.7, 2.0, 2.4, 2.8, 3.2, 3.6, 4.0)

F64 = np.float64
RealArray = npt.NDArray[np.float64]
Loss = Callable[[Tensor], Tensor]
Case = Callable[[], tuple[Loss, Tensor]]


@dataclass
class CheckResult:
    name: str
    passed: bool
    error: float
    tolerance: float
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.name}: error={self.error:.3e} "
            f"(tol {self.tolerance:.0e}, {self.seconds:.2f}s)"
        )


def _run(name: str, tolerance: float, fn: Callable[[], float]) -> CheckResult:
    start = time.perf_counter()
    error = fn()
    elapsed = time.perf_counter() - start
    passed = bool(np.isfinite(error)) and error < tolerance
    return CheckResult(name, passed, error, tolerance, elapsed)


def all_passed(results: list[CheckResult]) -> bool:
    return all(r.passed for r in results)


def _const(rng: np.random.Generator, *shape: int) -> Tensor:
    return Tensor(rng.normal(size=shape), dtype=F64)


def _leaf(rng: np.random.Generator, *shape: int, scale: float = 0.5) -> Tensor:
    return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=True, dtype=F64)


def _projection(rng: np.random.Generator, out: Tensor) -> Callable[[Tensor], Tensor]:
    """Fixed random weighting that turns an output into a scalar."""
    w = _const(rng, *out.shape)
    return lambda y: (y * w).sum()


def _textured_target(sr: RealArray) -> Tensor:
    """HR target strictly above ``sr``, striped along both axes.

    HR - SR keeps one sign everywhere and the stripes' Sobel variances exceed
    those of ``sr`` in every patch, keeping L1 and GV away from their kinks.
    """
    with no_grad():
        gx, gy = sobel_gradients(rgb_to_gray(Tensor(sr, dtype=F64)))
    steepest = float(max(np.abs(gx.data).max(), np.abs(gy.data).max()))
    # stripe patches have Sobel variance >= 0.8 * amplitude^2; sr patches <= steepest^2
    amplitude = 2.0 * steepest + 0.5
    h, w = sr.shape[-2:]
    stripes_v = (np.arange(h) // 2) % 2
    stripes_h = (np.arange(w) // 2) % 2
    pattern = (stripes_v[:, None] + stripes_h[None, :]) * (amplitude / 4.0)
    base = float(sr.max()) + 0.5
    return Tensor(np.broadcast_to(base + pattern, sr.shape).copy(), dtype=F64)


def _activate_branches(model: Model, rng: np.random.Generator, scale: float = 0.1) -> Model:
    """Give the zero-initialized adapted branches small non-zero weights."""
    for block in model.saam_blocks:
        if block.pointwise is not None:
            pw = block.pointwise.kernel
            pw.data[...] = rng.normal(0.0, scale, pw.shape)
        if block.bank.coeffs is not None:
            block.bank.coeffs.data += rng.normal(0.0, scale, block.bank.coeffs.shape)
    return model


# ---------------------------------------------------------------------------
# Finite-difference cases
# ---------------------------------------------------------------------------


def _elementwise_cases(rng: np.random.Generator) -> dict[str, Case]:
    addend = _const(rng, 2, 3, 4, 4)
    channel_scale = _const(rng, 1, 3, 1, 1)
    fns: dict[str, Loss] = {
        "add": lambda t: t + addend,
        "mul_broadcast": lambda t: t * channel_scale,
        "div": lambda t: t / (t.square() + 1.0),
        "sqrt": lambda t: (t.square() + 0.5).sqrt(),
        "abs": lambda t: (t + 3.0).abs(),
        "pow": lambda t: (t.square() + 1.0) ** 1.5,
        "silu": lambda t: activation(t, "silu"),
        "sigmoid": lambda t: activation(t, "sigmoid"),
        "relu": lambda t: activation(t, "relu"),
        "mean_keepdims": lambda t: t - t.mean(axis=(2, 3), keepdims=True),
        "transpose_slice": lambda t: t.transpose(0, 1, 3, 2)[:, :, 1:3, :],
    }

    def case(fn: Loss, kinked: bool) -> Case:
        def make() -> tuple[Loss, Tensor]:
            x = _leaf(rng, 2, 3, 4, 4)
            if kinked:
                x.data[np.abs(x.data) < 0.05] += 0.1
            proj = _projection(rng, fn(x))
            return (lambda t: proj(fn(t))), x

        return make

    return {f"op.{k}": case(fn, k == "relu") for k, fn in fns.items()}


def _conv_case(
    rng: np.random.Generator,
    c_in: int,
    c_out: int,
    k: int,
    stride: int,
    groups: int,
    wrt: str,
) -> Case:
    def make() -> tuple[Loss, Tensor]:
        x = _leaf(rng, 2, c_in, 6, 7)
        kernel = _leaf(rng, c_out, c_in // groups, k, k)
        bias = _leaf(rng, c_out)
        spec = ConvSpec(kernel, bias, stride=stride, padding=k // 2, groups=groups)
        proj = _projection(rng, conv2d(x, spec))
        targets = {"input": x, "kernel": kernel, "bias": bias}
        return (lambda _t: proj(conv2d(x, spec))), targets[wrt]

    return make


def _layer_cases(rng: np.random.Generator) -> dict[str, Case]:
    def softmax_case() -> tuple[Loss, Tensor]:
        x = _leaf(rng, 3, 5)
        proj = _projection(rng, x)
        return (lambda t: proj(softmax(t))), x

    def dense_case() -> tuple[Loss, Tensor]:
        x = _const(rng, 3, 4)
        w = _leaf(rng, 4, 5)
        b = _leaf(rng, 5)
        proj = _projection(rng, dense(x, w, b))
        return (lambda _t: proj(dense(x, w, b))), w

    def nearest_case() -> tuple[Loss, Tensor]:
        x = _leaf(rng, 1, 2, 3, 5)
        proj = _projection(rng, nearest_resize(x, 7, 4))
        return (lambda t: proj(nearest_resize(t, 7, 4))), x

    def blend_case(wrt: str) -> Case:
        def make() -> tuple[Loss, Tensor]:
            feat = _leaf(rng, 1, 2, 5, 5)
            coords = map_coords((5, 5), ScalePair(1.6, 2.3))
            rows = gathers(coords.base_v, 5, 4, F64)
            cols = gathers(coords.base_h, 5, 4, F64)
            weights = _leaf(rng, coords.out_h, coords.out_w, 4, 4)
            proj = _projection(rng, neighborhood_blend(feat, rows, cols, weights))
            target = feat if wrt == "features" else weights
            return (lambda _t: proj(neighborhood_blend(feat, rows, cols, weights))), target

        return make

    def simam_case(unbiased: bool) -> Case:
        def make() -> tuple[Loss, Tensor]:
            x = _leaf(rng, 2, 3, 4, 5)
            cfg = SimamConfig(variance_unbiased=unbiased)
            proj = _projection(rng, x)
            return (lambda t: proj(simam(t, cfg))), x

        return make

    def batchnorm_case() -> tuple[Loss, Tensor]:
        x = _leaf(rng, 3, 2, 4, 4)
        bn = BatchNorm2d.create(2, F64)
        proj = _projection(rng, x)
        return (lambda t: proj(bn(t))), x

    return {
        "op.softmax": softmax_case,
        "op.dense": dense_case,
        "op.nearest_resize": nearest_case,
        "op.neighborhood_blend.features": blend_case("features"),
        "op.neighborhood_blend.weights": blend_case("weights"),
        "simam": simam_case(False),
        "simam.unbiased": simam_case(True),
        "batchnorm": batchnorm_case,
    }


def _block_case(rng: np.random.Generator, wrt: str, norm_kind: NormKind = "simam") -> Case:
    def make() -> tuple[Loss, Tensor]:
        params = SaamBlockParams.create(
            rng, 4, experts=4, d_r=6, d_b=4, norm_kind=norm_kind, dtype=F64
        )
        if params.pointwise is not None:
            pw = params.pointwise.kernel
            pw.data[...] = rng.normal(0.0, 0.5, pw.shape)
        feat = _leaf(rng, 2, 4, 6, 6)
        scale = ScalePair(2.5, 3.0)
        proj = _projection(rng, feat)
        targets = {
            "features": feat,
            "routing": params.bank.routing_w1,
            "hourglass": params.hourglass.down.kernel,
        }
        if params.bank.coeffs is not None:
            targets["coeffs"] = params.bank.coeffs
        return (lambda _t: proj(saam_forward(feat, scale, params))), targets[wrt]

    return make


def _upsampler_case(rng: np.random.Generator, wrt: str) -> Case:
    def make() -> tuple[Loss, Tensor]:
        params = UpsamplerParams.create(rng, 4, d_u=8, dtype=F64)
        feat = _leaf(rng, 1, 4, 5, 5)
        scale = ScalePair(1.5, 2.0)
        if wrt == "reconstruct":
            proj = _projection(rng, reconstruct(feat, params))
            return (lambda t: proj(reconstruct(t, params))), feat
        proj = _projection(rng, upsample(feat, scale, params))
        targets = {
            "features": feat,
            "kernel_mlp": params.kpred_w1,
            "feat_conv": params.feat.kernel,
        }
        return (lambda _t: proj(upsample(feat, scale, params))), targets[wrt]

    return make


def _loss_case(rng: np.random.Generator, reduction: GvReduction) -> Case:
    def make() -> tuple[Loss, Tensor]:
        sr = Tensor(rng.uniform(0.3, 0.7, size=(2, 3, 16, 16)), dtype=F64)
        hr = _textured_target(sr.data)
        cfg = GvConfig(reduction=reduction)
        return (lambda t: loss_terms(hr, t, cfg).total), sr

    return make


def _model_case(rng: np.random.Generator, wrt: str) -> Case:
    def make() -> tuple[Loss, Tensor]:
        model = _activate_branches(build_model(ModelConfig(), F64), rng)
        lr = Tensor(rng.uniform(0.0, 1.0, size=(1, 3, 8, 8)), dtype=F64)
        scale = ScalePair(2.0, 2.0)
        with no_grad():
            hr = _textured_target(forward(model, lr, scale).data)
        bias = model.head.bias
        targets = {
            "input": lr,
            "expert_routing": model.saam_blocks[0].bank.routing_w1,
            "upsampler_kernel_mlp": model.upsampler.kpred_b1,
        }
        if bias is not None:
            targets["head"] = bias
        return (lambda _t: total_loss(hr, forward(model, lr, scale))), targets[wrt]

    return make


def gradcheck_cases(seed: int = 0) -> dict[str, Case]:
    rng = np.random.default_rng(seed)
    cases = _elementwise_cases(rng)
    for wrt in ("input", "kernel", "bias"):
        cases[f"conv2d.full.{wrt}"] = _conv_case(rng, 3, 4, 3, 1, 1, wrt)
    cases["conv2d.stride2.input"] = _conv_case(rng, 3, 2, 3, 2, 1, "input")
    cases["conv2d.depthwise.input"] = _conv_case(rng, 4, 4, 3, 1, 4, "input")
    cases["conv2d.depthwise.kernel"] = _conv_case(rng, 4, 4, 3, 1, 4, "kernel")
    cases["conv2d.pointwise.input"] = _conv_case(rng, 4, 3, 1, 1, 1, "input")
    cases.update(_layer_cases(rng))
    for wrt in ("features", "coeffs", "routing", "hourglass"):
        cases[f"saam_block.{wrt}"] = _block_case(rng, wrt)
    cases["saam_block.batchnorm.hourglass"] = _block_case(rng, "hourglass", "batchnorm")
    for wrt in ("features", "kernel_mlp", "feat_conv", "reconstruct"):
        cases[f"upsampler.{wrt}"] = _upsampler_case(rng, wrt)
    cases["loss.total"] = _loss_case(rng, "norm")
    cases["loss.total.gv_l2"] = _loss_case(rng, "l2")
    for wrt in ("input", "head", "expert_routing", "upsampler_kernel_mlp"):
        cases[f"model.{wrt}"] = _model_case(rng, wrt)
    return cases


def gradcheck_suite(seed: int = 0) -> list[CheckResult]:
    """Central differences (float64, eps 1e-3) against tape gradients."""

    def run(case: Case) -> Callable[[], float]:
        def check() -> float:
            f, x = case()
            return finite_diff_check(f, x, eps=1e-3)

        return check

    return [
        _run(name, GRAD_TOLERANCE, run(case))
        for name, case in gradcheck_cases(seed).items()
    ]


# ---------------------------------------------------------------------------
# Invariants beyond gradients
# ---------------------------------------------------------------------------


def conv_oracle(
    x: RealArray,
    kernel: RealArray,
    bias: RealArray | None,
    stride: int,
    padding: int,
    groups: int,
) -> RealArray:
    """Nested-loop grouped cross-correlation."""
    n, _, h, w = x.shape
    c_out, c_in_g, k, _ = kernel.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - k) // stride + 1
    wo = (w + 2 * padding - k) // stride + 1
    per_group = c_out // groups
    out = np.zeros((n, c_out, ho, wo))
    for b in range(n):
        for o in range(c_out):
            g = o // per_group
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0 if bias is None else float(bias[o])
                    for ci in range(c_in_g):
                        for u in range(k):
                            for v in range(k):
                                acc += float(
                                    xp[b, g * c_in_g + ci, i * stride + u, j * stride + v]
                                    * kernel[o, ci, u, v]
                                )
                    out[b, o, i, j] = acc
    return out


def random_conv_case(
    rng: np.random.Generator, case: int
) -> tuple[RealArray, RealArray, RealArray | None, int, int, int]:
    """Cycles through full, depthwise and pointwise layouts."""
    c_in = int(rng.integers(1, 5))
    if case % 3 == 1:
        groups, c_out, k = c_in, c_in * int(rng.integers(1, 3)), 3
    elif case % 3 == 2:
        groups, c_out, k = 1, int(rng.integers(1, 5)), 1
    else:
        groups, c_out, k = 1, int(rng.integers(1, 5)), int(rng.choice([1, 3, 5]))
    stride = int(rng.integers(1, 3))
    padding = int(rng.integers(0, k // 2 + 1))
    h, w = int(rng.integers(k, 9)), int(rng.integers(k, 9))
    x = rng.normal(size=(int(rng.integers(1, 3)), c_in, h, w))
    kernel = rng.normal(size=(c_out, c_in // groups, k, k))
    bias = rng.normal(size=c_out) if case % 2 else None
    return x, kernel, bias, stride, padding, groups


def _conv_oracle_error(rng: np.random.Generator, cases: int = 100) -> float:
    worst = 0.0
    for case in range(cases):
        x, kernel, bias, stride, padding, groups = random_conv_case(rng, case)
        spec = ConvSpec(
            kernel=Tensor(kernel, dtype=F64),
            bias=None if bias is None else Tensor(bias, dtype=F64),
            stride=stride,
            padding=padding,
            groups=groups,
        )
        got = conv2d(Tensor(x, dtype=F64), spec).data
        want = conv_oracle(x, kernel, bias, stride, padding, groups)
        worst = max(worst, float(np.max(np.abs(got - want))))
    return worst


def sample_scales(rng: np.random.Generator, count: int = 20) -> list[ScalePair]:
    """Fixed corner cases plus random (possibly asymmetric) pairs in [1, 4]."""
    fixed = [ScalePair(1, 1), ScalePair(4, 4), ScalePair(2, 3), ScalePair(1.7, 3.9)]
    drawn = [
        ScalePair(float(a), float(b))
        for a, b in rng.uniform(1.0, 4.0, size=(count - len(fixed), 2))
    ]
    return fixed + drawn


def _partition_of_unity_error(rng: np.random.Generator) -> float:
    params = UpsamplerParams.create(rng, 4, dtype=F64)
    directions: tuple[Direction, ...] = ("up", "down")
    worst = 0.0
    for scale in sample_scales(rng):
        value = float(rng.uniform(-1.0, 1.0))
        const = Tensor(np.full((1, 4, 6, 7), value), dtype=F64)
        with no_grad():
            out = interpolate(const, scale, params).data
        worst = max(worst, float(np.max(np.abs(out - value))))
        img = np.full((3, 13, 11), value)
        for direction in directions:
            res = bicubic_resample(img, scale, direction)
            worst = max(worst, float(np.max(np.abs(res - value))))
    return worst


def _softmax_sum_error(rng: np.random.Generator) -> float:
    block = SaamBlockParams.create(rng, 4, experts=16, dtype=F64)
    params = UpsamplerParams.create(rng, 4, dtype=F64)
    worst = 0.0
    for scale in sample_scales(rng):
        with no_grad():
            w = routing_weights(scale, block.bank).data
            kernels = predict_kernels(map_coords((5, 6), scale), scale, params).data
        worst = max(worst, abs(float(w.sum()) - 1.0))
        worst = max(worst, float(np.max(np.abs(kernels.sum(axis=(2, 3)) - 1.0))))
    return worst


def _gate_identity_error(rng: np.random.Generator, trials: int = 20) -> float:
    """M = 0 leaves F unchanged; M = 1 adds the full adapted branch."""
    worst = 0.0
    for _ in range(trials):
        block = SaamBlockParams.create(rng, 4, experts=4, dtype=F64)
        if block.pointwise is not None:
            pw = block.pointwise.kernel
            pw.data[...] = rng.normal(size=pw.shape)
        feat = _const(rng, 2, 4, 6, 6)
        r_v, r_h = (float(r) for r in rng.uniform(1.0, 4.0, size=2))
        scale = ScalePair(r_v, r_h)
        with no_grad():
            zeros = Tensor(np.zeros((2, 1, 6, 6)), dtype=F64)
            ones = Tensor(np.ones((2, 1, 6, 6)), dtype=F64)
            adapted = scale_aware_conv(feat, scale, block.bank, block.pointwise).data
            off = saam_forward(feat, scale, block, guidance=zeros).data
            on = saam_forward(feat, scale, block, guidance=ones).data
        worst = max(worst, float(np.max(np.abs(off - feat.data))))
        worst = max(worst, float(np.max(np.abs(on - (feat.data + adapted)))))
    return worst


def _neutrality_error(rng: np.random.Generator, trials: int = 10) -> float:
    """A freshly built model matches its SAAM-bypassed self."""
    model = build_model(ModelConfig(), F64)
    worst = 0.0
    for _ in range(trials):
        lr = Tensor(rng.uniform(size=(1, 3, 8, 9)), dtype=F64)
        for scale in (ScalePair(2, 2), ScalePair(3, 3), ScalePair(1.5, 2.5)):
            with no_grad():
                full = forward(model, lr, scale).data
                bypass = forward(model, lr, scale, bypass_saam=True).data
            worst = max(worst, float(np.max(np.abs(full - bypass))))
    return worst


def _output_dims_error() -> float:
    """Number of evaluation scales where one model misses ``floor(in * r)``."""
    model = build_model(ModelConfig())
    h, w = 10, 9
    scales = [ScalePair.uniform(r) for r in EVAL_SCALES] + [ScalePair(2, 3)]
    misses = 0
    for scale in scales:
        with no_grad():
            y = forward(model, Tensor(np.zeros((1, 3, h, w))), scale)
        want = (scaled_size(h, scale.r_v), scaled_size(w, scale.r_h))
        misses += (y.shape[2], y.shape[3]) != want
    return float(misses)


def _psnr_closed_form_error() -> float:
    a = np.zeros((3, 16, 16))
    return abs(psnr(a, a + 1.0 / 255.0) - 48.1308)


def selftest_suite(seed: int = 0) -> list[CheckResult]:
    """Conv oracle, partition of unity, gate identities, neutrality, softmax sums."""
    rng = np.random.default_rng(seed)
    return [
        _run("conv2d.oracle", ORACLE_TOLERANCE, lambda: _conv_oracle_error(rng)),
        _run("partition_of_unity", UNITY_TOLERANCE, lambda: _partition_of_unity_error(rng)),
        _run("softmax_sums", IDENTITY_TOLERANCE, lambda: _softmax_sum_error(rng)),
        _run("gate_identities", IDENTITY_TOLERANCE, lambda: _gate_identity_error(rng)),
        _run("init_neutrality", IDENTITY_TOLERANCE, lambda: _neutrality_error(rng)),
        _run("arbitrary_scale_dims", 0.5, _output_dims_error),
        _run("psnr_closed_form", PSNR_TOLERANCE, _psnr_closed_form_error),
    ]
