"""Command-line entry point: one subcommand per experiment.

    splinelab covering --out results/ --seed 4004
    splinelab converge --config my_converge.json --out results/ --depth 6

Without --config the fully explicit built-in default config runs; --seed and
--depth override the corresponding config fields.  Exit status is zero iff
every asserted bound holds.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import EXPERIMENT_NAMES, default_config, load_config, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splinelab",
        description="spline orthoprojector and maximal-function experiments",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENT_NAMES:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", help="JSON config file (defaults are built in)")
        sp.add_argument("--out", help="output directory for csv/json artifacts")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--depth", type=int, help="override the config depth")
        sp.add_argument("--quiet", action="store_true", help="suppress per-assertion lines")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config(args.experiment)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.config and cfg["experiment"] != args.experiment:
        print(
            f"error: config is for {cfg['experiment']!r}, subcommand is {args.experiment!r}",
            file=sys.stderr,
        )
        return 2
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.depth is not None:
        cfg["depth"] = args.depth
    return run_experiment(cfg, out_dir=args.out, quiet=args.quiet)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
