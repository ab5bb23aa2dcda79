"""saam-sr: Arbitrary-scale super-resolution with a scale-aware attention plug-in."""

# first: caps the BLAS pools before numpy loads
from . import threads  # noqa: F401
from .checkpoint import load_checkpoint, save_checkpoint
from .cli import main
from .config import get_thread_count, load_config_file, parse_scale
from .data import load_dataset, load_png, sample_batch, save_png
from .evaluate import evaluate, super_resolve
from .gradcheck import finite_diff_check
from .losses import GvConfig, gv_loss, total_loss
from .metrics import QualityReport, psnr, ssim
from .model import (
    ABLATION_PRESETS,
    Model,
    ModelConfig,
    build_model,
    features,
    forward,
    named_buffers,
    named_parameters,
    param_count,
    set_training,
)
from .optim import AdamHyper, AdamState, adam_step
from .report import format_report
from .resample import bicubic_resample
from .saam_block import ScalePair, saam_forward
from .simam import SimamConfig, simam
from .tensor import Tensor, no_grad
from .train import TrainConfig, train
from .upsampler import upsample

__all__ = [
    "ABLATION_PRESETS",
    "AdamHyper",
    "AdamState",
    "GvConfig",
    "Model",
    "ModelConfig",
    "QualityReport",
    "ScalePair",
    "SimamConfig",
    "Tensor",
    "TrainConfig",
    "adam_step",
    "bicubic_resample",
    "build_model",
    "evaluate",
    "features",
    "finite_diff_check",
    "format_report",
    "forward",
    "get_thread_count",
    "gv_loss",
    "load_checkpoint",
    "load_config_file",
    "load_dataset",
    "load_png",
    "main",
    "named_buffers",
    "named_parameters",
    "no_grad",
    "param_count",
    "parse_scale",
    "psnr",
    "saam_forward",
    "sample_batch",
    "save_checkpoint",
    "save_png",
    "set_training",
    "simam",
    "ssim",
    "super_resolve",
    "total_loss",
    "train",
    "upsample",
]
