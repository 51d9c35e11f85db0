"""Command-line entry point.

Subcommands map onto experiment kinds; the config file carries everything
else.  Exit codes: 0 success, 2 config error, 3 run failure.
"""

import argparse
import sys

from .experiments import ConfigError, RunConfig, run

_SUBCOMMANDS = {
    "calibrate": ("calibrate",),
    "train": ("train",),
    "sample": ("sample-target", "generate"),
    "classify": ("classify",),
    "sweep": ("sweep-stp",),
    "compare": ("compare",),
    "complete": ("pattern-complete",),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spikesampler",
        description="Seeded, reproducible sampling experiments on binary "
        "energy-based models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kinds in _SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run a config of kind {' or '.join(kinds)}")
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's seed list with one seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel seed workers (default: $SPIKESAMPLER_WORKERS or 1)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig.from_yaml(args.config)
        allowed = _SUBCOMMANDS[args.command]
        if config.experiment not in allowed:
            raise ConfigError(
                "experiment",
                f"subcommand '{args.command}' expects {' or '.join(allowed)}, "
                f"got {config.experiment!r}",
            )
        if args.seed is not None:
            config.seeds = [args.seed]
            config.raw["seeds"] = [args.seed]
        if args.out is not None:
            config.out_dir = args.out
            config.raw["out_dir"] = args.out
    except (ConfigError, FileNotFoundError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run(config, workers=args.workers)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"run failed: {exc}", file=sys.stderr)
        return 3
    ok = len(manifest.outputs)
    fail = len(manifest.failures)
    print(f"{config.experiment}: {ok} seed(s) done, {fail} failed -> {config.out_dir}")
    for seed, files in sorted(manifest.outputs.items()):
        print(f"  seed {seed}: {', '.join(files)}")
    if manifest.failures:
        for seed, msg in sorted(manifest.failures.items()):
            print(f"  seed {seed} FAILED: {msg}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
