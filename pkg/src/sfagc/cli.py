"""Command-line surface: train, eval, gradcheck, synth, convert-off.

Exit codes: 0 success, 1 validation failure (bad arguments, malformed
files, failed checks), 2 unexpected runtime failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .datasets import (
    SYNTH_KINDS,
    normalize_unit_sphere,
    sample_off_mesh,
    save_points,
    synth_dataset,
)
from .errors import SfagcError
from .gradcheck import GRADCHECK_SCOPES, format_report, run_gradcheck
from .models import ABLATION_VARIANTS
from .training import evaluate_checkpoint, load_config, train_model

__all__ = ["main", "build_parser"]


def _cmd_train(args) -> int:
    config = load_config(args.config)
    net, history = train_model(config, quiet=False)
    last = history[-1]
    metric = "test_oa" if config.task == "classify" else "test_miou"
    print(f"done: {len(history)} epochs, final {metric} {last[metric]:.4f}")
    print(f"artifacts in {config.out}: metrics.jsonl, final.ckpt")
    return 0


def _cmd_eval(args) -> int:
    scores = evaluate_checkpoint(args.checkpoint, args.data, args.spec, args.variant)
    for key in sorted(scores):
        print(f"{key} {scores[key]:.4f}")
    return 0


def _cmd_gradcheck(args) -> int:
    rows, ok, elapsed = run_gradcheck(args.scope, tol=args.tol, corrupt=args.corrupt)
    print(format_report(args.scope, rows, ok, elapsed))
    return 0 if ok else 1


def _cmd_synth(args) -> int:
    points = args.points if args.points is not None else (64 if args.kind == "classify4" else 128)
    manifest = synth_dataset(
        args.kind,
        per_class=args.per_class,
        n_points=points,
        seed=args.seed,
        out_dir=args.out,
        test_per_class=args.test_per_class,
    )
    print(
        f"wrote {len(manifest.train)} train / {len(manifest.test)} test clouds "
        f"({points} points each) under {args.out}"
    )
    return 0


def _cmd_convert_off(args) -> int:
    pts = sample_off_mesh(args.input, n=args.n, rng=np.random.default_rng(args.seed))
    coords = pts.coords if args.raw else normalize_unit_sphere(pts.coords)
    save_points(coords, args.out)
    print(f"sampled {args.n} points from {args.input} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfagc",
        description="attention-based spatial graph convolution for point clouds",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network from a config file")
    p.add_argument("--config", required=True, help="key=value run configuration")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a manifest's test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset manifest path")
    p.add_argument("--spec", required=True, help="network spec name the checkpoint belongs to")
    p.add_argument("--variant", default="full", choices=ABLATION_VARIANTS)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("gradcheck", help="compare tape gradients to finite differences")
    p.add_argument("--scope", required=True, choices=GRADCHECK_SCOPES)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--corrupt", default=None, help=argparse.SUPPRESS)  # test hook
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--kind", required=True, choices=SYNTH_KINDS)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--per-class", type=int, default=100, dest="per_class")
    p.add_argument("--points", type=int, default=None, help="points per cloud (default 64/128)")
    p.add_argument("--test-per-class", type=int, default=None, dest="test_per_class")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("convert-off", help="sample a point cloud from an OFF mesh")
    p.add_argument("--in", required=True, dest="input", help="OFF mesh path")
    p.add_argument("--n", type=int, default=1024, help="number of surface samples")
    p.add_argument("--out", required=True, help="output .xyz or .bin path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--raw", action="store_true", help="skip unit-sphere normalization")
    p.set_defaults(fn=_cmd_convert_off)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 0
        return 0 if code == 0 else 1
    try:
        return args.fn(args)
    except SfagcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"unexpected failure: {exc!r}", file=sys.stderr)
        return 2
