"""Command-line entry point: ``cupgame run|montecarlo|certify``."""
from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from .core import ConfigError, GameError
from .harness import (
    SpecError,
    certify_text,
    cmd_certify,
    cmd_montecarlo,
    cmd_run,
    dumps,
    load_config,
    spec_from,
)


def _game_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file whose keys mirror these flags")
    p.add_argument("--n", type=int)
    p.add_argument("--filler")
    p.add_argument("--emptier")
    p.add_argument("--rounds", type=int)
    p.add_argument("--semantics", choices=["standard", "negative"])
    p.add_argument("--extra-budget", type=int)
    p.add_argument("--skip-budget", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--arithmetic", choices=["exact", "float"])
    p.add_argument("--monitor", dest="monitors")
    p.add_argument("--survey", action="store_true", help="log monitor violations instead of aborting")
    p.add_argument("--initial")
    p.add_argument("--summary", help="write the JSON summary here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cupgame", description="Variable-processor cup game simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="play one game, emit a CSV trace and a JSON summary")
    _game_flags(run)
    run.add_argument("--trace", help="CSV trace path")
    run.add_argument("--require-backlog", help="fail (exit 1) if the final backlog is below this")

    mc = sub.add_parser("montecarlo", help="independent seeded trials with binomial statistics")
    _game_flags(mc)
    mc.add_argument("--trials", type=int)
    mc.add_argument("--predicate")
    mc.add_argument("--workers", type=int)
    mc.add_argument("--require-lower", help="fail (exit 1) if the 99%% lower bound is below this")

    cert = sub.add_parser("certify", help="print certified guarantee tables")
    cert.add_argument("--filler", required=True)
    cert.add_argument("--n", dest="sizes", required=True,
                      help="a size, a range lo..hi, or a comma list")
    cert.add_argument("--format", choices=["json", "text"], default="json")
    return ap


def _spec(args, extra=()):
    config = {}
    if args.config:
        with open(args.config) as fh:
            config = load_config(fh.read())
    keys = ["n", "filler", "emptier", "rounds", "semantics", "extra_budget", "skip_budget", "seed",
            "arithmetic", "monitors", "initial", "summary", *extra]
    overrides = {k: getattr(args, k, None) for k in keys}
    if args.survey:
        overrides["strict"] = False
    return spec_from(config, **overrides)


def _sizes(text: str) -> list:
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",")]


def _emit(text: str, path):
    if not path:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            spec = _spec(args, ["trace"])
            summary, _ = cmd_run(spec)
            _emit(dumps(summary), spec.summary)
            failed = summary["strict_violation"]
            if args.require_backlog is not None:
                failed = failed or summary["backlog"] < Fraction(args.require_backlog)
            return 1 if failed else 0
        if args.cmd == "montecarlo":
            spec = _spec(args, ["trials", "predicate", "workers"])
            summary = cmd_montecarlo(spec)
            _emit(dumps(summary), spec.summary)
            failed = summary["strict_violations"] > 0
            if args.require_lower is not None:
                failed = failed or summary["ci99"][0] < float(args.require_lower)
            return 1 if failed else 0
        result = cmd_certify(args.filler, _sizes(args.sizes))
        sys.stdout.write(dumps(result) if args.format == "json" else certify_text(result))
        return 0
    except (SpecError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except GameError as e:
        print(f"game aborted: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
