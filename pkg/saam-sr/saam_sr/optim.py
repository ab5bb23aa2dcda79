"""Adam with bias correction over named parameters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor import Array, Tensor


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ConfigError("lr", f"must be > 0, got {self.lr}")
        for name, beta in (("beta1", self.beta1), ("beta2", self.beta2)):
            if not 0.0 <= beta < 1.0:
                raise ConfigError(name, f"must be in [0, 1), got {beta}")
        if self.eps <= 0:
            raise ConfigError("eps", f"must be > 0, got {self.eps}")


@dataclass
class AdamState:
    """First/second moments per parameter name and the shared step count."""

    step: int = 0
    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, Array | None],
    state: AdamState,
    hyper: AdamHyper,
) -> None:
    """Update ``params`` in place; names without a gradient are left alone."""
    state.step += 1
    t = state.step
    correction1 = 1.0 - hyper.beta1**t
    correction2 = 1.0 - hyper.beta2**t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.data.shape:
            msg = f"gradient for '{name}' has shape {g.shape}, parameter {p.data.shape}"
            raise DimensionError(msg)
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None or v is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = hyper.beta1 * m + (1.0 - hyper.beta1) * g
        v = hyper.beta2 * v + (1.0 - hyper.beta2) * (g * g)
        state.m[name], state.v[name] = m, v
        m_hat = m / correction1
        v_hat = v / correction2
        p.data -= (hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)).astype(p.dtype)


def gradients(params: dict[str, Tensor]) -> dict[str, Array | None]:
    return {name: p.grad for name, p in params.items()}


def zero_grads(params: dict[str, Tensor]) -> None:
    for p in params.values():
        p.zero_grad()
