"""Command-line interface.

Commands::

    vesselseg segment IMAGE OUT [--mask MASK] [--config FILE]
                      [--dump-intermediates DIR] [--fov-threshold T] [--jobs N]
    vesselseg evaluate ROOT --split {train,test} --csv-out FILE
                      [--config FILE] [--with-auc] [--jobs N]
    vesselseg sweep ROOT --split {train,test} --grid FILE --csv-out FILE
                      [--config FILE] [--jobs N] [--max-combos N]

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal error.
Output files are written via temp-file + rename, so failures leave no
partial outputs behind.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback

from . import pipeline
from .config import (
    ConfigError,
    apply_overrides,
    default_config,
    grid_combinations,
    grid_size,
    parse_config,
    parse_grid,
    serialize_config,
)
from .dataset import DatasetError, index_drive
from .evaluation import aggregate, metrics_csv
from .preprocess import derive_fov_mask
from .raster import (
    RasterFormatError,
    atomic_write_bytes,
    load_mask,
    load_rgb,
    save_gray,
    save_mask,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit 2; the CLI contract is 1
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="vesselseg", description="Retinal vessel extraction pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="segment a single fundus image")
    seg.add_argument("image", help="input fundus image (8-bit RGB PNG/PPM)")
    seg.add_argument("out", help="output binary vessel mask")
    seg.add_argument("--mask", help="FOV mask image; derived from the image when absent")
    seg.add_argument("--config", help="pipeline config file")
    seg.add_argument("--dump-intermediates", metavar="DIR", help="write stage images here")
    seg.add_argument("--fov-threshold", type=float, default=0.1,
                     help="luminance threshold for the derived FOV (default 0.1)")
    seg.add_argument("--jobs", type=int, default=1, help="accepted for symmetry; unused")

    ev = sub.add_parser("evaluate", help="evaluate a DRIVE split")
    ev.add_argument("root", help="dataset root (PNG-converted DRIVE layout)")
    ev.add_argument("--split", choices=("train", "test"), required=True)
    ev.add_argument("--csv-out", required=True, help="per-image metrics CSV")
    ev.add_argument("--config", help="pipeline config file")
    ev.add_argument("--with-auc", action="store_true", help="also compute ROC AUC")
    ev.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    sw = sub.add_parser("sweep", help="grid-search configs on a split")
    sw.add_argument("root", help="dataset root (PNG-converted DRIVE layout)")
    sw.add_argument("--split", choices=("train", "test"), required=True)
    sw.add_argument("--grid", required=True, help="grid file of key = v1, v2, ... lines")
    sw.add_argument("--csv-out", required=True, help="one row per combination")
    sw.add_argument("--config", help="base pipeline config file")
    sw.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sw.add_argument("--max-combos", type=int, default=4096,
                    help="reject larger grids up front (default 4096)")
    return parser


def _load_config(path):
    return parse_config(path) if path else default_config()


def _cmd_segment(args) -> int:
    cfg = _load_config(args.config)
    img = load_rgb(args.image)
    if args.mask:
        fov = load_mask(args.mask)
        if fov.shape != img.shape[:2]:
            raise DatasetError(f"FOV mask {args.mask} does not match image dimensions")
    else:
        fov = derive_fov_mask(img, args.fov_threshold)
    result = pipeline.segment_image(img, fov, cfg)
    save_mask(result.mask, args.out)
    if args.dump_intermediates:
        os.makedirs(args.dump_intermediates, exist_ok=True)
        stem = os.path.splitext(os.path.basename(args.image))[0]
        for name, stage in result.pre.stages.items():
            save_gray(stage, os.path.join(args.dump_intermediates, f"{stem}_{name}.png"))
        save_gray(result.response, os.path.join(args.dump_intermediates, f"{stem}_response.png"))
        save_mask(result.mask, os.path.join(args.dump_intermediates, f"{stem}_binary.png"))
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    cases = index_drive(args.root, args.split)
    rows = pipeline.evaluate_cases(cases, cfg, with_auc=args.with_auc, jobs=args.jobs)
    agg = aggregate([report for _, report in rows])
    atomic_write_bytes(args.csv_out, metrics_csv(rows, agg).encode("ascii"))
    excluded = {k: v for k, v in agg.excluded.items() if v and not (k == "auc" and not args.with_auc)}
    if excluded:
        print(f"warning: undefined metrics excluded from aggregation: {excluded}", file=sys.stderr)
    summary = " ".join(
        f"{name}={agg.mean[name]:.4f}" for name in ("sen", "spe", "acc", "auc", "kappa", "mcc")
        if agg.mean[name] is not None
    )
    print(f"{args.split} mean over {len(rows)} images: {summary}")
    return EXIT_OK


_SWEEP_METRICS = ("sen", "spe", "acc", "kappa", "mcc")


def _cmd_sweep(args) -> int:
    base = _load_config(args.config)
    grid = parse_grid(args.grid)
    n_combos = grid_size(grid)
    if n_combos > args.max_combos:
        raise ConfigError(f"grid has {n_combos} combinations (cap {args.max_combos})")
    cases = index_drive(args.root, args.split)
    keys = [key for key, _ in grid]

    results = []
    for combo in grid_combinations(grid):
        cfg = apply_overrides(base, combo, source=args.grid)
        rows = pipeline.evaluate_cases(cases, cfg, with_auc=False, jobs=args.jobs)
        agg = aggregate([report for _, report in rows])
        results.append((combo, agg))
        shown = " ".join(f"{k}={combo[k]}" for k in keys) or "(base config)"
        mcc = agg.mean["mcc"]
        print(f"{shown}: mcc={mcc:.4f}" if mcc is not None else f"{shown}: mcc undefined")

    results.sort(key=lambda item: -1.0 if item[1].mean["mcc"] is None else item[1].mean["mcc"],
                 reverse=True)
    header = keys + [f"mean_{m}" for m in _SWEEP_METRICS] + ["std_acc"]
    lines = [",".join(header)]
    for combo, agg in results:
        cells = [_grid_cell(combo[k]) for k in keys]
        cells += ["" if agg.mean[m] is None else f"{agg.mean[m]:.6f}" for m in _SWEEP_METRICS]
        cells.append("" if agg.std["acc"] is None else f"{agg.std['acc']:.6f}")
        lines.append(",".join(cells))
    atomic_write_bytes(args.csv_out, ("\n".join(lines) + "\n").encode("ascii"))
    if results:
        best_combo, best_agg = results[0]
        best = " ".join(f"{k}={best_combo[k]}" for k in keys) or "(base config)"
        mcc = best_agg.mean["mcc"]
        print(f"best by mcc: {best}" + (f" (mcc={mcc:.4f})" if mcc is not None else ""))
        print(serialize_config(apply_overrides(base, best_combo, source=args.grid)), end="")
    return EXIT_OK


def _grid_cell(value) -> str:
    if isinstance(value, tuple):
        return "|".join(repr(float(v)) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "segment":
            return _cmd_segment(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        raise _UsageError(f"unknown command {args.command!r}")
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, RasterFormatError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
