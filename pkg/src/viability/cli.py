"""Command line entry point: ``viability {oracle,learn,sweep,render}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from viability.config import ConfigError, ExperimentConfig
from viability.experiment import cmd_learn, cmd_oracle, cmd_sweep
from viability.render import RenderError, render_run

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _seed_list(text):
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return seeds


def build_parser():
    parser = argparse.ArgumentParser(prog="viability", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("oracle", "learn", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment YAML file, or builtin:<name>")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory (overrides config and VIABILITY_OUT)")
        if name != "oracle":
            p.add_argument("--no-score", action="store_true", help="skip scoring against the oracle")
        if name == "sweep":
            p.add_argument("--seeds", required=True, type=_seed_list, help="e.g. 0-9 or 1,4,7")
            p.add_argument("--workers", type=int, default=1)
    p = sub.add_parser("render")
    p.add_argument("learn_dir", help="directory written by 'learn' (contains trace.jsonl)")
    p.add_argument("--out", default=None)
    p.add_argument("--scale", type=int, default=8)
    return parser


def _load(args):
    if args.config.startswith("builtin:"):
        cfg = ExperimentConfig.builtin(args.config.split(":", 1)[1])
    else:
        cfg = ExperimentConfig.load(args.config)
    # --out is passed to the commands directly so it also beats VIABILITY_OUT
    return cfg.with_overrides(seed=args.seed, output_dir=args.out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "render":
            result = render_run(args.learn_dir, args.out, args.scale)
        else:
            cfg = _load(args)
            if args.command == "oracle":
                result = {"written": str(cmd_oracle(cfg, args.out))}
            elif args.command == "learn":
                result = cmd_learn(cfg, args.out, score=not args.no_score)
            else:
                result = cmd_sweep(cfg, args.seeds, args.out, score=not args.no_score, workers=args.workers)["summary"]
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    json.dump(result, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
