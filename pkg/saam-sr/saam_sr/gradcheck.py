"""Central finite-difference verification of tape gradients."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from .errors import ArgumentError
from .tensor import Tensor, no_grad

EPS_RANGE = (1e-5, 1e-2)


def finite_diff_check(
    f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-3
) -> float:
    """Max over coordinates of |a - n| / max(1e-8, |a| + |n|).

    ``x`` is perturbed in place, so it may be a model parameter that ``f`` reads
    through a closure. Run in float64; single precision is too noisy.
    """
    if not EPS_RANGE[0] <= eps <= EPS_RANGE[1]:
        msg = f"eps {eps} outside [{EPS_RANGE[0]}, {EPS_RANGE[1]}]"
        raise ArgumentError(msg)

    x.requires_grad = True
    x.zero_grad()
    loss = f(x)
    if loss.data.size != 1:
        msg = f"function must return a scalar, got shape {loss.shape}"
        raise ArgumentError(msg)
    loss.backward()
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()

    numeric = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            plus = f(x).item()
            flat[i] = original - eps
            minus = f(x).item()
            flat[i] = original
            numeric.reshape(-1)[i] = (plus - minus) / (2.0 * eps)

    denom = np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))
