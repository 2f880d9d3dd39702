"""Command line entry point: ``swarmsec {train,evaluate,baseline,sweep}``.

Exit status: 0 on success, 2 for configuration errors, 3 for runtime errors.
Unrecognised ``--section.key value`` arguments are configuration overrides.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .baselines import STRATEGIES
from .config import load_config, parse_value, split_overrides
from .errors import CheckpointError, ConfigError, TrainingError
from . import harness

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file layered over the built-in defaults")
    p.add_argument("--label", help="run directory name (run.label)")
    p.add_argument("--seeds", type=int, nargs="+", help="seed list (run.seeds)")
    p.add_argument("--output-dir", help="output root (run.output_dir)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swarmsec", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("-v", "--verbose", action="store_true", help="progress logging to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", allow_abbrev=False, help="train one agent per seed")
    _common(p)
    p.add_argument("--timing", action="store_true", help="record wall-clock ms per step")

    p = sub.add_parser("evaluate", allow_abbrev=False, help="deterministic rollouts of a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="require the checkpoint to match this configuration")
    p.add_argument("--out", help="directory for metrics.csv and summary.json")

    p = sub.add_parser("baseline", allow_abbrev=False, help="evaluate a fixed strategy")
    p.add_argument("strategy", help=f"one of {', '.join(STRATEGIES)}")
    _common(p)
    p.add_argument("--episodes", type=int, help="episodes per seed (run.eval_episodes)")

    p = sub.add_parser("sweep", allow_abbrev=False, help="train (or evaluate a strategy) across one axis")
    p.add_argument("axis", choices=harness.SWEEP_AXES)
    p.add_argument("values", nargs="+")
    _common(p)
    p.add_argument("--strategy", help="evaluate this baseline instead of training")
    p.add_argument("--episodes", type=int, help="evaluation episodes per seed for --strategy")
    p.add_argument("--timing", action="store_true")
    return parser


def _resolve(args, extra):
    overrides = split_overrides(extra)
    label = args.label
    if label is None and args.command == "baseline":
        label = f"baseline-{args.strategy}"
    if label is not None:
        overrides.append(("run.label", json.dumps(label)))
    if args.seeds is not None:
        overrides.append(("run.seeds", json.dumps(args.seeds)))
    if args.output_dir is not None:
        overrides.append(("run.output_dir", json.dumps(args.output_dir)))
    if getattr(args, "episodes", None) is not None:
        overrides.append(("run.eval_episodes", str(args.episodes)))
    if getattr(args, "timing", False):
        overrides.append(("run.timing", "true"))
    return load_config(args.config, overrides)


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def dispatch(args, extra) -> int:
    if args.command == "evaluate":
        if extra:
            raise ConfigError(f"evaluate takes no overrides, got {' '.join(extra)}")
        expected = load_config(args.config).config_hash() if args.config else None
        _print(harness.run_evaluate(args.checkpoint, args.episodes, args.seed, args.out, expected))
        return EXIT_OK
    cfg = _resolve(args, extra)
    if args.command == "train":
        _print({str(k): v for k, v in harness.run_train(cfg).items()})
    elif args.command == "baseline":
        _print({str(k): v for k, v in harness.run_baseline(args.strategy, cfg).items()})
    else:
        values = [parse_value(v) for v in args.values]
        print(harness.run_sweep(args.axis, values, cfg, args.strategy))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        return dispatch(args, extra)
    except ConfigError as exc:
        print(f"swarmsec: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CheckpointError, TrainingError, OSError, RuntimeError, ValueError) as exc:
        print(f"swarmsec: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
