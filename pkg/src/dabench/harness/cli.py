"""Command-line driver: generate | mcmc | approx | evaluate | forecast | report."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config, preset_names
from . import stages

STAGES = ("generate", "mcmc", "approx", "evaluate", "forecast", "report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dabench",
        description="Benchmark Gaussian data-assimilation approximations "
                    "against a pCN-MCMC gold standard on 2-D flow inverse problems.",
        epilog=f"Config may be a YAML path or a preset name: {preset_names()}",
    )
    sub = parser.add_subparsers(dest="stage", required=True)
    for name in STAGES:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", required=True,
                       help="config YAML path or preset name")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--cache", default=None,
                       help="gold-standard cache directory")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "approx":
            p.add_argument("--method", required=True,
                           help="method label (e.g. rml, enkf, enkf_loc)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, seed_override=args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.stage == "generate":
            stages.stage_generate(cfg, out)
        elif args.stage == "mcmc":
            stages.stage_mcmc(cfg, out, cache=args.cache)
        elif args.stage == "approx":
            stages.stage_approx(cfg, out, label=args.method)
        elif args.stage == "evaluate":
            stages.stage_evaluate(cfg, out)
        elif args.stage == "forecast":
            stages.stage_forecast(cfg, out)
        elif args.stage == "report":
            stages.stage_report(cfg, out)
    except Exception as exc:  # surface stage failures as nonzero exit codes
        print(f"dabench {args.stage} failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
