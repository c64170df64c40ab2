"""
Command-Line Front End
=======================
Subcommands:
  synth      write the synthetic moving-shapes dataset
  train      teacher-forced training; epoch CSV on stdout, checkpoint to --out
  infer      propagate first-frame masks through every sequence
  eval       J / F report CSV; prints the GLOBAL row
  gradcheck  end-to-end gradient check of the toy model
  bench      ops/sec of gcf and sgru_step
  ablate     train + score the full model and the S, L, W ablations

Logs go to stderr (LOG_LEVEL from the environment or .env); machine-readable
results go to stdout.

Exit codes: 0 ok, 1 check failure, 2 config, 3 I/O, 4 numeric,
5 checkpoint mismatch. argparse usage errors also exit 2.

Run:
  python -m cli synth --out data/train --seed 0
  python -m cli train --data data/train --config configs/toy.conf --out toy.ckpt
  python -m cli infer --data data/val --ckpt toy.ckpt --out pred --config configs/toy.conf
  python -m cli eval --pred pred --gt data/val --report report.csv
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Any, Callable, Optional, Sequence

from dotenv import load_dotenv

from errors import CheckFailure, ConfigError, DTMError
from segnet import ModelParams
from storage import load_checkpoint, save_checkpoint, write_text_atomic
from vosdata import evaluate, load_dataset, synth_generate
from workers.ablation import ABLATION_CSV_HEADER, VARIANTS, run_ablation
from workers.bench import run_bench
from workers.gradcheck import run_gradcheck
from workers.inference import run_inference
from workers.trainer import EPOCH_CSV_HEADER, EpochLog, Trainer

from .config import Config, load_config

logger = logging.getLogger("cli")


def _emit(line: str) -> None:
    print(line, flush=True)


# ── Argument types ──────────────────────────────────────────────────────


def _assignment(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key.strip(), value.strip()


def _size(text: str) -> tuple[int, int]:
    """'64' or '64x48' (width x height)."""
    parts = text.lower().replace("×", "x").split("x")
    try:
        dims = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or WxH, got {text!r}") from None
    if len(dims) == 1:
        return dims[0], dims[0]
    if len(dims) == 2:
        return dims[0], dims[1]
    raise argparse.ArgumentTypeError(f"expected N or WxH, got {text!r}")


def _tolerance(text: str) -> Optional[int]:
    if text.lower() == "davis":
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance must be a pixel count or 'davis', got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"tolerance must be >= 0, got {value}")
    return value


# ── Config assembly ─────────────────────────────────────────────────────


def _overrides(args: argparse.Namespace, names: Sequence[str]) -> dict[str, Any]:
    values: dict[str, Any] = dict(getattr(args, "set", None) or [])
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    return values


def _config(args: argparse.Namespace, *names: str) -> Config:
    overrides = _overrides(args, ("seed", "disable_short", "disable_long", "unweighted_adjacency") + names)
    size = getattr(args, "size", None)
    if size is not None:
        overrides["width"], overrides["height"] = size
    return load_config(args.config, overrides)


def _required_path(value: Optional[Any], flag: str, key: str) -> str:
    if value is None:
        raise ConfigError(f"{flag} is required (or set '{key}' in the config file)")
    return str(value)


# ── Commands ────────────────────────────────────────────────────────────


def cmd_synth(args: argparse.Namespace) -> None:
    cfg = _config(args, "sequences", "frames", "occluder_rate")
    count = synth_generate(cfg.synth_config(), args.out)
    _emit(str(count))


def cmd_train(args: argparse.Namespace) -> None:
    cfg = _config(args, "epochs")
    data = _required_path(args.data or cfg.data, "--data", "data")
    dataset = load_dataset(data, masks="all")
    init = ModelParams(values=load_checkpoint(args.init)) if args.init else None

    _emit(EPOCH_CSV_HEADER)

    def report(log: EpochLog) -> None:
        _emit(log.csv())

    trainer = Trainer(cfg.network_config(), cfg.train_config(), cfg.ablation_flags(), on_epoch=report)
    params = trainer.fit(dataset, init=init)
    save_checkpoint(args.out, params.values)


def cmd_infer(args: argparse.Namespace) -> None:
    cfg = _config(args)
    data = _required_path(args.data or cfg.data, "--data", "data")
    params = ModelParams(values=load_checkpoint(args.ckpt))
    dataset = load_dataset(data, masks="first")
    seconds = run_inference(dataset, params, cfg.network_config(), args.out, cfg.ablation_flags())
    _emit(f"seconds_per_frame,{seconds:.6f}")


def cmd_eval(args: argparse.Namespace) -> None:
    report = evaluate(args.pred, args.gt, tol=args.tol)
    csv = report.to_csv()
    if args.report:
        write_text_atomic(args.report, csv)
        logger.info(f"report written to {args.report}")
        _emit(report.global_row())
    else:
        sys.stdout.write(csv)
        sys.stdout.flush()


def cmd_gradcheck(args: argparse.Namespace) -> None:
    error = run_gradcheck(seed=args.seed, eps=args.eps, max_entries=args.max_entries, frames=args.frames)
    _emit(f"{error:.6e}")
    if not error <= args.tol:
        raise CheckFailure(f"max relative error {error:.3e} exceeds tolerance {args.tol:.1e}")


def cmd_bench(args: argparse.Namespace) -> None:
    _emit("kernel,ops_per_sec")
    for name, rate in run_bench(args.seconds).items():
        _emit(f"{name},{rate:.1f}")


def cmd_ablate(args: argparse.Namespace) -> None:
    cfg = _config(args, "epochs")
    data = _required_path(args.data or cfg.data, "--data", "data")
    heldout = _required_path(args.heldout or cfg.heldout, "--heldout", "heldout")
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    unknown = [v for v in variants if v not in VARIANTS]
    if unknown or not variants:
        raise ConfigError(f"unknown ablation variant(s) {unknown}; choose from {', '.join(VARIANTS)}")
    try:
        tol = cfg.boundary_tolerance if args.tol is None else _tolerance(args.tol)
    except argparse.ArgumentTypeError as exc:
        raise ConfigError(str(exc)) from exc

    rows = run_ablation(
        load_dataset(data, masks="all"),
        load_dataset(heldout, masks="all"),
        cfg.network_config(),
        cfg.train_config(),
        variants,
        tol,
    )
    _emit(ABLATION_CSV_HEADER)
    for row in rows:
        _emit(row.csv())


# ── Parser ──────────────────────────────────────────────────────────────


def _config_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", metavar="FILE", help="key = value config file")
    parent.add_argument(
        "--set", metavar="KEY=VALUE", type=_assignment, action="append",
        help="Override one config key (repeatable)",
    )
    parent.add_argument("--seed", type=int, help="Random seed (overrides the config)")
    return parent


def _ablation_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("ablation")
    group.add_argument("--disable-short", dest="disable_short", action="store_const", const=True,
                       help="Drop the short-term graph memory (variant S)")
    group.add_argument("--disable-long", dest="disable_long", action="store_const", const=True,
                       help="Drop the long-term recurrent memory (variant L)")
    group.add_argument("--unweighted-adjacency", dest="unweighted_adjacency", action="store_const", const=True,
                       help="Fix the edge projections to identity (variant W)")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtmnet",
        description="Dual temporal memory video object segmentation at desk scale",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    config, ablation = _config_options(), _ablation_options()

    p = sub.add_parser("synth", parents=[config], help="Generate the synthetic dataset")
    p.add_argument("--out", required=True, help="Output directory (must not exist or be empty)")
    p.add_argument("--sequences", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--size", type=_size, help="N or WxH, divisible by 4")
    p.add_argument("--occluder-rate", dest="occluder_rate", type=float)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("train", parents=[config, ablation], help="Train a model")
    p.add_argument("--data", help="Training dataset root")
    p.add_argument("--out", required=True, help="Checkpoint file to write")
    p.add_argument("--init", metavar="CKPT", help="Start from this checkpoint (fine-tuning)")
    p.add_argument("--epochs", type=int)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("infer", parents=[config, ablation], help="Predict masks for a dataset")
    p.add_argument("--data", help="Dataset root (first-frame masks required)")
    p.add_argument("--ckpt", required=True, help="Checkpoint file")
    p.add_argument("--out", required=True, help="Prediction directory (must not exist or be empty)")
    p.set_defaults(handler=cmd_infer)

    p = sub.add_parser("eval", help="Score predictions against ground truth")
    p.add_argument("--pred", required=True, help="Prediction root")
    p.add_argument("--gt", required=True, help="Ground-truth dataset root")
    p.add_argument("--tol", type=_tolerance, default=1, help="Boundary tolerance in pixels, or 'davis'")
    p.add_argument("--report", help="CSV file to write (stdout gets the GLOBAL row)")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("gradcheck", help="Central-difference gradient check of the toy model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-entries", dest="max_entries", type=int,
                   help="Check at most this many entries per parameter")
    p.add_argument("--frames", type=int, default=2, choices=(2, 3),
                   help="Toy length; 3 puts the S-GRU update on the gradient path")
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("bench", help="Kernel throughput")
    p.add_argument("--seconds", type=float, default=1.0, help="Minimum timing window per kernel")
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("ablate", parents=[config], help="Compare the full model with its ablations")
    p.add_argument("--data", help="Training dataset root")
    p.add_argument("--heldout", help="Held-out dataset root")
    p.add_argument("--variants", default=",".join(VARIANTS), help="Comma list of full,S,L,W")
    p.add_argument("--tol", help="Boundary tolerance in pixels, or 'davis' (default: config)")
    p.add_argument("--epochs", type=int)
    p.set_defaults(handler=cmd_ablate)

    return parser


def _configure_logging() -> None:
    load_dotenv()
    logging.basicConfig(
        level=os.environ.get("LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s [%(name)s] %(levelname)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    handler: Callable[[argparse.Namespace], None] = args.handler
    try:
        handler(args)
    except DTMError as exc:
        logger.error(f"{args.command} failed: {exc}")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
