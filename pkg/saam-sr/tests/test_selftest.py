import numpy as np
import pytest

from saam_sr.gradcheck import finite_diff_check
from saam_sr.selftest import (
    CheckResult,
    all_passed,
    gradcheck_cases,
    gradcheck_suite,
    sample_scales,
    selftest_suite,
)


def test_invariant_suite_passes() -> None:
    results = selftest_suite(seed=0)
    failed = [r.line() for r in results if not r.passed]
    assert not failed
    assert {r.name for r in results} >= {"conv2d.oracle", "psnr_closed_form"}


@pytest.mark.parametrize(
    "name",
    [
        "saam_block.coeffs",
        "upsampler.kernel_mlp",
        "loss.total",
        "loss.total.gv_l2",
        "model.input",
        "model.head",
    ],
)
def test_selected_gradients(name: str) -> None:
    fn, leaf = gradcheck_cases(seed=2)[name]()
    assert finite_diff_check(fn, leaf) < 1e-4


def test_case_names_cover_every_component() -> None:
    prefixes = {name.split(".")[0] for name in gradcheck_cases(seed=0)}
    assert {"op", "conv2d", "simam", "saam_block", "upsampler", "loss", "model"} <= prefixes


def test_sampled_scales_stay_in_range() -> None:
    scales = sample_scales(np.random.default_rng(0), 50)
    assert len(scales) == 50
    assert all(1.0 <= s.r_v <= 4.5 and 1.0 <= s.r_h <= 4.5 for s in scales)


def test_result_line_and_verdict() -> None:
    ok = CheckResult("x", True, 1e-7, 1e-4, 0.01)
    bad = CheckResult("y", False, float("nan"), 1e-4, 0.01)
    assert ok.line().startswith("PASS x: error=1.000e-07")
    assert bad.line().startswith("FAIL y")
    assert all_passed([ok])
    assert not all_passed([ok, bad])


def test_full_gradient_suite_passes_on_a_fresh_build() -> None:
    failed = [r.line() for r in gradcheck_suite(seed=0) if not r.passed]
    assert not failed
