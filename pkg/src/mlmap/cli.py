"""``mlmap`` command line: synth, label, map, eval, export.

Exit status is 0 on success, 1 when inputs or configuration fail validation
and 2 on I/O or file-format errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, format_config, load_config
from .io import FormatError, read_map, write_pgm
from .pipeline import (evaluate, export_csv, label_sequence, load_dataset, run_mapping, save_mapping,
                       write_metrics, write_sequence)

log = logging.getLogger("mlmap")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _config(args) -> RunConfig:
    """--config if given, else ``<dataset>/config.txt`` if present, else defaults; --seed overrides."""
    path = getattr(args, "config", None)
    if path is None and getattr(args, "dataset", None) is not None:
        candidate = Path(args.dataset) / "config.txt"
        path = candidate if candidate.exists() else None
    cfg = load_config(path) if path is not None else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def cmd_synth(args) -> int:
    from .geometry import CameraIntrinsics
    from .synth import fixture_config, friction_scalars, make_sequence

    w, h = args.width, args.height
    intr = CameraIntrinsics(w * 0.625, w * 0.625, (w - 1) / 2, (h - 1) / 2, w, h)
    seq = make_sequence(args.seed, args.frames, args.semantic_accuracy, args.traversability_accuracy, intr)
    scalars = friction_scalars(seq, np.random.default_rng([args.seed, 1])) if args.scalars else None
    cfg = fixture_config(args.seed, args.pixel_stride)
    write_sequence(args.out, seq, cfg, scalars, "." + args.cloud_format)
    print(f"wrote {len(seq)} frames to {args.out}")
    return EXIT_OK


def cmd_label(args) -> int:
    cfg = _config(args)
    records = load_dataset(args.dataset, cfg)
    out = Path(args.out) if args.out else Path(args.dataset) / "traversability"
    out.mkdir(parents=True, exist_ok=True)
    n = 0
    for rec, labels in zip(records, label_sequence(records, cfg)):
        if labels is not None:
            write_pgm(out / f"{rec.frame_id:06d}.pgm", labels)
            n += 1
    print(f"labeled {n} frames into {out}")
    return EXIT_OK


def cmd_map(args) -> int:
    cfg = _config(args)
    records = load_dataset(args.dataset, cfg)
    result = run_mapping(records, cfg)
    save_mapping(result, args.out)
    for k, v in result.report().items():
        print(f"{k}={v}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    records = load_dataset(args.dataset, cfg)
    grid = read_map(args.map)
    report = evaluate(records, grid, cfg)
    if args.out:
        write_metrics(args.out, report)
    for k, v in report.items():
        print(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}")
    return EXIT_OK


def cmd_export(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    export_csv(read_map(args.map), args.out, cfg)
    return EXIT_OK


def cmd_config(args) -> int:
    sys.stdout.write(format_config(_config(args)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mlmap", description="Continuous semantic and traversability mapping.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-frame progress and timing")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="render a synthetic corridor sequence")
    s.add_argument("out")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--frames", type=int, default=10)
    s.add_argument("--width", type=int, default=64)
    s.add_argument("--height", type=int, default=48)
    s.add_argument("--semantic-accuracy", type=float, default=0.95)
    s.add_argument("--traversability-accuracy", type=float, default=0.75)
    s.add_argument("--pixel-stride", type=int, default=2, help="written into the generated config.txt")
    s.add_argument("--cloud-format", choices=("bin", "xyz"), default="bin")
    s.add_argument("--no-scalars", dest="scalars", action="store_false", help="skip friction samples")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("label", help="geometric traversability labels from point clouds")
    s.add_argument("dataset")
    s.add_argument("--config")
    s.add_argument("--out", help="output directory (default: <dataset>/traversability)")
    s.set_defaults(func=cmd_label)

    s = sub.add_parser("map", help="fuse a sequence into semantic/traversability/friction maps")
    s.add_argument("dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_map)

    s = sub.add_parser("eval", help="pixel-wise IoU of a traversability map against ground truth")
    s.add_argument("dataset")
    s.add_argument("map")
    s.add_argument("--config")
    s.add_argument("--out", help="write <out>.txt and <out>.csv")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("export", help="map file to CSV 'x y z value variance'")
    s.add_argument("map")
    s.add_argument("out")
    s.add_argument("--config", help="needed for friction maps with non-default layer parameters")
    s.set_defaults(func=cmd_export)

    s = sub.add_parser("config", help="print the effective configuration")
    s.add_argument("dataset", nargs="?")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, FormatError) as exc:
        print(f"mlmap: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"mlmap: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
