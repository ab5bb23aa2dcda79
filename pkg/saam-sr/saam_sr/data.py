"""PNG ingestion and multi-scale patch sampling."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import numpy.typing as npt
from PIL import Image, UnidentifiedImageError

from .errors import DataError, DimensionError
from .resample import bicubic_resample
from .saam_block import ScalePair, scaled_size
from .tensor import Tensor

if TYPE_CHECKING:
    from .train import TrainConfig

logger = logging.getLogger(__name__)

ImageArray = npt.NDArray[np.float32]

MAX_SAMPLE_FAILURES = 100
# r_v, r_h in {1.1, 1.2, ..., 4.0}
CONTINUOUS_GRID = np.round(np.arange(11, 41) / 10.0, 1)

_SIXTEEN_BIT_MODES = {"I;16", "I;16B", "I;16L", "I;16N", "I"}


def load_png(path: Path) -> ImageArray:
    """Decode to (3, H, W) float32 in [0, 1]; gray is replicated to RGB."""
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode in _SIXTEEN_BIT_MODES:
                gray = np.asarray(img, dtype=np.float64) / 65535.0
                rgb = np.repeat(gray[None], 3, axis=0)
            else:
                rgb = np.asarray(img.convert("RGB"), dtype=np.float64).transpose(2, 0, 1)
                rgb = rgb / 255.0
    except (OSError, UnidentifiedImageError, ValueError) as e:
        msg = f"cannot decode {path}: {e}"
        raise DataError(msg) from e
    return np.ascontiguousarray(np.clip(rgb, 0.0, 1.0), dtype=np.float32)


def to_uint8(img: npt.NDArray[Any]) -> npt.NDArray[np.uint8]:
    """Clamp to [0, 1], then quantize to 8 bits; returns (H, W, 3)."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 4 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 3 or arr.shape[0] != 3:
        msg = f"expected an RGB image (3, H, W), got {arr.shape}"
        raise DimensionError(msg)
    quantized = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    return np.ascontiguousarray(quantized.transpose(1, 2, 0))


def save_png(path: Path, img: Tensor | npt.NDArray[Any]) -> None:
    pixels = img.numpy() if isinstance(img, Tensor) else img
    Image.fromarray(to_uint8(pixels)).save(path, format="PNG")


def png_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        msg = f"data directory {directory} does not exist"
        raise DataError(msg)
    return sorted(p for p in directory.iterdir() if p.suffix.lower() == ".png")


def load_named_images(directory: Path) -> list[tuple[str, ImageArray]]:
    """(file name, image) pairs sorted by name; undecodable files are skipped."""
    images = []
    for path in png_files(directory):
        try:
            images.append((path.name, load_png(path)))
        except DataError as e:
            logger.warning(f"skipping {path.name}: {e}")
    if not images:
        msg = f"no decodable PNG images in {directory}"
        raise DataError(msg)
    return images


def load_dataset(directory: Path) -> list[ImageArray]:
    return [img for _, img in load_named_images(directory)]


def draw_scale(cfg: TrainConfig, rng: np.random.Generator) -> ScalePair:
    """One scale per batch, uniform over the configured set or the continuous grid."""
    if cfg.continuous_scales:
        r_v, r_h = rng.choice(CONTINUOUS_GRID, size=2)
        return ScalePair(float(r_v), float(r_h))
    return cfg.scales[int(rng.integers(len(cfg.scales)))]


def hr_patch_size(lr_patch: int, scale: ScalePair) -> tuple[int, int]:
    return scaled_size(lr_patch, scale.r_v), scaled_size(lr_patch, scale.r_h)


def sample_batch(
    dataset: list[ImageArray],
    cfg: TrainConfig,
    rng: np.random.Generator,
    dtype: npt.DTypeLike = np.float32,
) -> tuple[Tensor, Tensor, ScalePair]:
    """Random HR crops of ``floor(lr_patch * r)`` and their exact-size bicubic LR."""
    if not dataset:
        msg = "cannot sample from an empty dataset"
        raise DataError(msg)
    scale = draw_scale(cfg, rng)
    hr_h, hr_w = hr_patch_size(cfg.lr_patch, scale)

    crops: list[ImageArray] = []
    failures = 0
    while len(crops) < cfg.batch:
        img = dataset[int(rng.integers(len(dataset)))]
        h, w = img.shape[1], img.shape[2]
        if h < hr_h or w < hr_w:
            failures += 1
            if failures >= MAX_SAMPLE_FAILURES:
                msg = (
                    f"no image fits a {hr_h}x{hr_w} crop at scale {scale} "
                    f"after {failures} attempts"
                )
                raise DataError(msg)
            continue
        top = int(rng.integers(h - hr_h + 1))
        left = int(rng.integers(w - hr_w + 1))
        crops.append(img[:, top : top + hr_h, left : left + hr_w])

    hr = np.stack(crops).astype(np.float64)
    lr = bicubic_resample(hr, scale, "down", out_size=(cfg.lr_patch, cfg.lr_patch))
    return Tensor(lr, dtype=dtype), Tensor(hr, dtype=dtype), scale
