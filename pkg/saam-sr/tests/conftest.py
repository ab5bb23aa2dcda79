"""Shared fixtures: seeded generators, small model configs, PNG directories."""

from __future__ import annotations

from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from saam_sr.model import ModelConfig


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_cfg() -> ModelConfig:
    """Four channels, two residual blocks, one SAAM block."""
    return ModelConfig(channels=4, num_blocks=2, insertion_period=2, experts=4, d_u=8)


def write_png(path: Path, pixels: np.ndarray) -> Path:
    """Write (H, W, 3) uint8, (H, W) uint8 or (H, W) uint16 pixels."""
    Image.fromarray(pixels).save(path, format="PNG")
    return path


@pytest.fixture
def png_dir(tmp_path: Path) -> Callable[..., Path]:
    """Factory for a directory of random RGB PNGs."""

    def make(count: int = 2, size: tuple[int, int] = (32, 32), seed: int = 0) -> Path:
        directory = tmp_path / f"images_{count}_{size[0]}x{size[1]}_{seed}"
        directory.mkdir()
        gen = np.random.default_rng(seed)
        for i in range(count):
            # smooth content so bicubic degradation is meaningful
            y, x = np.mgrid[0 : size[0], 0 : size[1]]
            base = 0.5 + 0.4 * np.sin(x / (3.0 + i) + gen.uniform(0, 6)) * np.cos(
                y / (4.0 + i)
            )
            rgb = np.stack([base, base[::-1], base[:, ::-1]], axis=-1)
            write_png(directory / f"img_{i:02d}.png", np.round(rgb * 255).astype(np.uint8))
        return directory

    return make
