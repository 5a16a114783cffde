"""Command-line front end: ``noisy-rgbd <command> ...``.

Exit codes: 0 success, 1 domain error (bad recipe, association or
alignment failure), 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .core import ConfigError
from .dataset import read_trajectory, read_trajectory_or_empty
from .evaluation import AlignmentKind, evaluate, mesh_metrics, read_points
from .fixture import write_fixture
from .motion import DEFAULT_FPS, motion_statistics
from .pipeline import FASTER_MOTION, load_config, run, validate
from .presets import RECIPE_DIR, shipped_recipes, write_presets
from .severity import format_severity_table

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2

_EPILOG = f"""\
perturbation kinds and severity table values (levels 1-5):
{format_severity_table()}

  motion_deviation       [rotation_std_deg, translation_std_m]  per-axis Gaussian stds
  {FASTER_MOTION:<22} [ratio]  keep every ratio-th frame
  desync                 [interval, delayed]  pair rgb[t] with depth[t + interval]

Environment: NOISY_RGBD_THREADS caps the perturb worker pool.
"""


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_perturb(args) -> int:
    config = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.input is not None:
        changes["input"] = args.input
    if args.output is not None:
        changes["output"] = args.output
    config = config.replace(**changes)
    manifest = run(config, workers=args.workers, overwrite=args.overwrite)
    print(f"wrote {manifest['output_frames']} frames to {config.output}")
    for stage in manifest["stages"]:
        print(f"  {stage['stage']:<17} {stage['kind']}")
    if args.out:
        _write_json(args.out, manifest)
    return EXIT_OK


def cmd_validate(args) -> int:
    config = load_config(args.config)
    if args.input is not None:
        config = validate(config.replace(input=args.input))
    names = [e.kind for e in config.active] or ["(identity)"]
    print(f"{args.config}: ok ({' -> '.join(names)})")
    return EXIT_OK


def read_trajectory_or_empty_strict(path):
    """Missing file raises; an empty file is an empty estimate."""
    if not Path(path).exists():
        raise FileNotFoundError(f"no such trajectory file: {path}")
    return read_trajectory_or_empty(path)


def cmd_eval(args) -> int:
    gt = read_trajectory(args.gt)
    # with capping a missing estimate file is a tracking failure, not an I/O error
    est = read_trajectory_or_empty(args.est) if args.cap_failures else read_trajectory_or_empty_strict(args.est)
    report = evaluate(gt, est, args.alignment, args.delta, args.max_dt, args.cap_failures)
    print(report.format())
    if args.out:
        _write_json(args.out, report.to_dict())
    return EXIT_OK


def cmd_mesh_eval(args) -> int:
    m = mesh_metrics(read_points(args.reconstructed), read_points(args.ground_truth), args.threshold, args.squared)
    unit = "m^2" if args.squared else "m"
    print(f"Accuracy          : {m.accuracy:.6f} {unit}")
    print(f"Completion        : {m.completion:.6f} {unit}")
    print(f"Completion ratio  : {m.completion_ratio:.2f} %")
    if args.out:
        _write_json(args.out, m.to_dict())
    return EXIT_OK


def cmd_stats(args) -> int:
    stats = motion_statistics(read_trajectory(args.trajectory), args.fps)
    for name, value in stats.summary.items():
        print(f"{name:<31}: {value:.6f}")
    if args.out:
        _write_json(args.out, stats.to_dict())
    return EXIT_OK


def cmd_tables(args) -> int:
    print(format_severity_table())
    return EXIT_OK


def cmd_fixture(args) -> int:
    layout = write_fixture(args.directory, args.frames)
    print(f"wrote {args.frames}-frame fixture to {layout.root}")
    return EXIT_OK


def cmd_presets(args) -> int:
    if args.write:
        paths = write_presets(args.write)
        print(f"wrote {len(paths)} recipes to {args.write}")
    else:
        for p in shipped_recipes():
            print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisy-rgbd",
        description="Synthesize perturbed RGB-D sequences and evaluate trajectories and meshes.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("perturb", help="apply a recipe to a clean sequence")
    p.add_argument("--config", required=True, help="YAML recipe")
    p.add_argument("--seed", type=int, help="override the recipe seed")
    p.add_argument("--input", help="clean sequence directory (overrides the recipe)")
    p.add_argument("--output", help="output sequence directory (overrides the recipe)")
    p.add_argument("--workers", type=int, help="worker threads (default: NOISY_RGBD_THREADS or CPU count, max 8)")
    p.add_argument("--overwrite", action="store_true", help="replace a non-empty output directory")
    p.add_argument("--out", help="also write the manifest to this JSON file")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("validate", help="check a recipe without running it")
    p.add_argument("config")
    p.add_argument("--input", help="sequence to check the desync interval against")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("eval", help="ATE, RPE and success rate of an estimated trajectory")
    p.add_argument("--gt", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--alignment", choices=[k.value for k in AlignmentKind], default=AlignmentKind.SE3.value)
    p.add_argument("--delta", type=int, default=1, help="RPE frame step")
    p.add_argument("--max-dt", type=float, default=0.02, help="association window in seconds")
    p.add_argument("--cap-failures", action="store_true",
                   help="score missing or unusable estimates as ATE = RPE = 1.0, SR = 0")
    p.add_argument("--out", help="write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mesh-eval", help="accuracy / completion between two ASCII XYZ point clouds")
    p.add_argument("reconstructed")
    p.add_argument("ground_truth")
    p.add_argument("--threshold", type=float, default=0.05, help="completion-ratio threshold in meters")
    p.add_argument("--squared", action="store_true", help="use squared nearest-neighbour distances")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mesh_eval)

    p = sub.add_parser("stats", help="translation / rotation speed and acceleration of a trajectory")
    p.add_argument("trajectory")
    p.add_argument("--fps", type=float, default=DEFAULT_FPS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("tables", help="print the severity tables")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("fixture", help="write the synthetic test sequence")
    p.add_argument("directory")
    p.add_argument("--frames", type=int, default=16)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("presets", help=f"list the shipped recipes in {RECIPE_DIR.name}/ or regenerate them")
    p.add_argument("--write", metavar="DIR", help="write every preset recipe to DIR")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
