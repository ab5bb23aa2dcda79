"""Parameter-free SimAM attention and the batch-norm arm it replaces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from .errors import ConfigError
from .functional import activation
from .tensor import Tensor, parameter


@dataclass(frozen=True)
class SimamConfig:
    """Energy regularizer and variance convention."""

    lam: float = 1e-4
    variance_unbiased: bool = False

    def __post_init__(self) -> None:
        if self.lam <= 0:
            raise ConfigError("simam_lambda", f"must be > 0, got {self.lam}")


def simam(x: Tensor, cfg: SimamConfig | None = None) -> Tensor:
    """Scale each element by sigmoid of its inverse minimal energy.

    Per channel: ``a(t) = sigmoid(((t - mu)^2 + 2 var + 2 lam) / (4 (var + lam)))``.
    A 1×1 map has zero deviation and zero variance, so every weight is
    ``sigmoid(0.5)``; the unbiased variant falls back to n there.
    """
    cfg = cfg or SimamConfig()
    h, w = x.shape[2], x.shape[3]
    n = h * w
    divisor = n - 1 if cfg.variance_unbiased and n > 1 else n
    mu = x.mean(axis=(2, 3), keepdims=True)
    d = (x - mu).square()
    var = d.sum(axis=(2, 3), keepdims=True) * (1.0 / divisor)
    energy_inv = (d + var * 2.0 + 2.0 * cfg.lam) / ((var + cfg.lam) * 4.0)
    return x * activation(energy_inv, "sigmoid")


@dataclass
class BatchNorm2d:
    """Per-channel batch normalization with running statistics."""

    gamma: Tensor
    beta: Tensor
    running_mean: Tensor
    running_var: Tensor
    momentum: float = 0.1
    eps: float = 1e-5
    training: bool = field(default=True, compare=False)

    @classmethod
    def create(cls, channels: int, dtype: npt.DTypeLike = np.float32) -> BatchNorm2d:
        return cls(
            gamma=parameter(np.ones(channels), dtype=dtype),
            beta=parameter(np.zeros(channels), dtype=dtype),
            running_mean=Tensor(np.zeros(channels), dtype=dtype),
            running_var=Tensor(np.ones(channels), dtype=dtype),
        )

    def __call__(self, x: Tensor) -> Tensor:
        c = x.shape[1]
        if self.training:
            mean = x.mean(axis=(0, 2, 3), keepdims=True)
            centered = x - mean
            var = centered.square().mean(axis=(0, 2, 3), keepdims=True)
            m = self.momentum
            self.running_mean.data[...] = (1 - m) * self.running_mean.data + (
                m * mean.data.reshape(c)
            )
            self.running_var.data[...] = (1 - m) * self.running_var.data + (
                m * var.data.reshape(c)
            )
            normed = centered / (var + self.eps).sqrt()
        else:
            mean_t = Tensor(self.running_mean.data.reshape(1, c, 1, 1), dtype=x.dtype)
            std = np.sqrt(self.running_var.data + self.eps).reshape(1, c, 1, 1)
            normed = (x - mean_t) / Tensor(std, dtype=x.dtype)
        return normed * self.gamma.reshape(1, c, 1, 1) + self.beta.reshape(1, c, 1, 1)


NormSlot = SimamConfig | BatchNorm2d


def apply_norm(x: Tensor, slot: NormSlot) -> Tensor:
    """Run whichever normalization occupies a batch-norm slot."""
    if isinstance(slot, SimamConfig):
        return simam(x, slot)
    return slot(x)
