"""Command-line interface for saam-sr."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .checkpoint import load_checkpoint
from .config import get_thread_count, load_config_file, parse_scale
from .data import load_dataset, load_named_images, load_png, save_png
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    DimensionError,
    NonFiniteLossError,
    ScaleRangeError,
)
from .evaluate import evaluate, super_resolve
from .experiments import gv_comparison, learning_run
from .model import ABLATION_PRESETS, param_count
from .report import format_report, format_side_by_side, write_report
from .saam_block import ScalePair
from .selftest import CheckResult, all_passed, gradcheck_suite, selftest_suite
from .train import TrainConfig, apply_preset, train, with_seed

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NAN = 4
EXIT_OUTPUT = 5

LOG_FORMAT = "%(message)s"


def _fail(code: int, message: object) -> int:
    print(f"Error: {message}", file=sys.stderr)
    return code


def _attach_logging(log_file: Path | None) -> list[logging.Handler]:
    """Route the package logger to stderr and, when given, a log file."""
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file is not None:
        handlers.append(logging.FileHandler(log_file, mode="w"))
    root = logging.getLogger("saam_sr")
    root.setLevel(logging.INFO)
    for handler in handlers:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
    return handlers


def _detach_logging(handlers: list[logging.Handler]) -> None:
    root = logging.getLogger("saam_sr")
    for handler in handlers:
        root.removeHandler(handler)
        handler.close()


def _check_scale(scale: ScalePair, max_scale: float) -> None:
    try:
        scale.check(max_scale)
    except ScaleRangeError as e:
        raise ConfigError("scale", str(e)) from e


def cmd_train(args: argparse.Namespace) -> int:
    """Handle train subcommand."""
    try:
        cfg = TrainConfig.from_mapping(load_config_file(Path(args.config)))
        if args.preset:
            cfg = apply_preset(cfg, args.preset)
        if args.seed is not None:
            cfg = with_seed(cfg, args.seed)
    except ConfigError as e:
        return _fail(EXIT_CONFIG, e)

    log_file = cfg.checkpoint_path.with_name(cfg.checkpoint_path.name + ".log")
    try:
        handlers = _attach_logging(log_file)
    except OSError as e:
        return _fail(EXIT_OUTPUT, f"cannot write log {log_file}: {e}")

    try:
        result = train(cfg)
    except (ConfigError, ScaleRangeError) as e:
        return _fail(EXIT_CONFIG, e)
    except (DataError, DimensionError) as e:
        return _fail(EXIT_DATA, e)
    except NonFiniteLossError as e:
        return _fail(EXIT_NAN, e)
    except (CheckpointError, OSError) as e:
        return _fail(EXIT_OUTPUT, e)
    finally:
        _detach_logging(handlers)

    print(f"Wrote {result.checkpoint_path}", file=sys.stderr)
    if result.best_path is not None:
        print(
            f"Best total {result.best_total:.6f} kept at {result.best_path}",
            file=sys.stderr,
        )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    """Handle eval subcommand."""
    try:
        scale = parse_scale(args.scale)
        workers = get_thread_count()
    except ConfigError as e:
        return _fail(EXIT_CONFIG, e)
    try:
        model = load_checkpoint(Path(args.ckpt))
    except CheckpointError as e:
        return _fail(EXIT_OUTPUT, e)
    try:
        _check_scale(scale, model.config.max_scale)
    except ConfigError as e:
        return _fail(EXIT_CONFIG, e)

    handlers = _attach_logging(None)
    try:
        images = load_named_images(Path(args.data))
        reports = evaluate(
            model, images, scale, baseline=args.baseline == "bicubic", workers=workers
        )
    except (DataError, DimensionError) as e:
        return _fail(EXIT_DATA, e)
    finally:
        _detach_logging(handlers)

    print(param_count(model).format())
    print()
    if len(reports) > 1:
        print(format_side_by_side(reports))
    else:
        print(format_report(reports[0]))

    report_dir = Path(args.report_dir)
    try:
        for report in reports:
            txt, csv = write_report(report, report_dir)
            print(f"Wrote {txt} and {csv}", file=sys.stderr)
        if len(reports) > 1:
            (report_dir / "report_side_by_side.txt").write_text(
                format_side_by_side(reports) + "\n"
            )
    except OSError as e:
        return _fail(EXIT_OUTPUT, f"cannot write reports to {report_dir}: {e}")
    return EXIT_OK


def cmd_sr(args: argparse.Namespace) -> int:
    """Handle sr subcommand."""
    try:
        scale = parse_scale(args.scale)
    except ConfigError as e:
        return _fail(EXIT_CONFIG, e)
    try:
        model = load_checkpoint(Path(args.ckpt))
    except CheckpointError as e:
        return _fail(EXIT_OUTPUT, e)
    try:
        _check_scale(scale, model.config.max_scale)
    except ConfigError as e:
        return _fail(EXIT_CONFIG, e)
    try:
        image = load_png(Path(args.input))
        out = super_resolve(model, image, scale)
    except (DataError, DimensionError) as e:
        return _fail(EXIT_DATA, e)
    try:
        save_png(Path(args.out), out)
    except OSError as e:
        return _fail(EXIT_OUTPUT, f"cannot write {args.out}: {e}")
    print(
        f"Wrote {args.out} ({out.shape[1]}x{out.shape[2]} from "
        f"{image.shape[1]}x{image.shape[2]} at {scale})",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    """Train on the configured images and report the learning or GV numbers."""
    try:
        cfg = TrainConfig.from_mapping(load_config_file(Path(args.config)))
        if args.seed is not None:
            cfg = with_seed(cfg, args.seed)
    except ConfigError as e:
        return _fail(EXIT_CONFIG, e)

    handlers = _attach_logging(None)
    try:
        images = load_dataset(cfg.data_dir)
        if args.run == "learning":
            lines = learning_run(cfg, images).lines()
        else:
            lines = gv_comparison(cfg, images).lines()
    except (ConfigError, ScaleRangeError) as e:
        return _fail(EXIT_CONFIG, e)
    except (DataError, DimensionError) as e:
        return _fail(EXIT_DATA, e)
    except NonFiniteLossError as e:
        return _fail(EXIT_NAN, e)
    except (CheckpointError, OSError) as e:
        return _fail(EXIT_OUTPUT, e)
    finally:
        _detach_logging(handlers)

    print("\n".join(lines))
    return EXIT_OK


def _report_checks(results: list[CheckResult]) -> int:
    for result in results:
        print(result.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed", file=sys.stderr)
    return EXIT_OK if all_passed(results) else EXIT_FAILURE


def cmd_gradcheck(args: argparse.Namespace) -> int:
    """Finite-difference checks of every differentiable op and the full model."""
    return _report_checks(gradcheck_suite(args.seed))


def cmd_selftest(args: argparse.Namespace) -> int:
    """Gradient checks plus conv oracle, partition of unity and gate identities."""
    return _report_checks(gradcheck_suite(args.seed) + selftest_suite(args.seed))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="saam-sr",
        description="Arbitrary-scale super-resolution with scale-aware attention",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    # train subcommand
    train_parser = subparsers.add_parser("train", help="Train from a key=value config")
    train_parser.add_argument("--config", required=True, help="Config file path")
    train_parser.add_argument(
        "--preset", choices=sorted(ABLATION_PRESETS), help="Ablation preset"
    )
    train_parser.add_argument("--seed", type=int, default=None)

    # eval subcommand
    eval_parser = subparsers.add_parser("eval", help="PSNR/SSIM on a PNG directory")
    eval_parser.add_argument("--ckpt", required=True)
    eval_parser.add_argument("--data", required=True)
    eval_parser.add_argument("--scale", required=True, help="RV[xRH], e.g. 2, 2.5, 2x3")
    eval_parser.add_argument("--baseline", choices=["bicubic"], default=None)
    eval_parser.add_argument(
        "--report-dir", default="reports", help="Report directory (default: reports)"
    )

    # sr subcommand
    sr_parser = subparsers.add_parser("sr", help="Super-resolve one image")
    sr_parser.add_argument("--ckpt", required=True)
    sr_parser.add_argument("--input", required=True)
    sr_parser.add_argument("--scale", required=True, help="RV[xRH], e.g. 2, 2.5, 2x3")
    sr_parser.add_argument("--out", required=True)

    # experiment subcommand
    experiment_parser = subparsers.add_parser(
        "experiment", help="Overfit the training images and report L1/PSNR or the GV effect"
    )
    experiment_parser.add_argument("--config", required=True, help="Config file path")
    experiment_parser.add_argument("--run", choices=["learning", "gv"], default="learning")
    experiment_parser.add_argument("--seed", type=int, default=None)

    for name, help_text in (
        ("gradcheck", "Finite-difference gradient checks"),
        ("selftest", "All invariant checks"),
    ):
        check_parser = subparsers.add_parser(name, help=help_text)
        check_parser.add_argument("--seed", type=int, default=0)

    return parser


def main(argv: list[str] | None = None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    commands = {
        "train": cmd_train,
        "eval": cmd_eval,
        "sr": cmd_sr,
        "experiment": cmd_experiment,
        "gradcheck": cmd_gradcheck,
        "selftest": cmd_selftest,
    }
    return commands[args.command](args)
