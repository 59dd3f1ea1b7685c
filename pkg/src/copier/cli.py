"""Command-line entry point: generate, train, evaluate, check."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as ex

log = logging.getLogger("copier")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'key = value' config file")
    common.add_argument("--mode", choices=ex.MODES)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="run directory")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    common.add_argument("--print-config", action="store_true",
                        help="print the effective config with all defaults and exit")

    parser = argparse.ArgumentParser(prog="copier", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write instances and the split manifest")
    sub.add_parser("train", parents=[common], help="train both views, write checkpoints and history")
    sub.add_parser("evaluate", parents=[common], help="evaluate checkpoints on the test split")
    sub.add_parser("check", parents=[common],
                   help="exit 0 if the run directory holds every expected file")
    return parser


def load_config(args) -> ex.RunConfig:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    for key in ("mode", "seed", "out"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if args.config and not Path(args.config).exists():
        raise FileNotFoundError(f"config file {args.config} does not exist")
    return ex.RunConfig.load(args.config, overrides)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ValueError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return 2
    if args.print_config:
        sys.stdout.write(cfg.dumps())
        return 0
    out = Path(cfg.out)
    try:
        if args.command == "generate":
            rows = ex.generate(cfg, out)
            log.info("wrote %d instances to %s", len(rows), out)
        elif args.command == "train":
            res = ex.run_train(cfg, out)
            log.info("trained %s: %d history rows, %d mapped, %d rejected",
                     cfg.run_id, len(res.rows), res.n_mapped, res.n_rejected)
        elif args.command == "evaluate":
            res = ex.run_evaluate(cfg, out)
            log.info("mean final reward %.4f (A %.4f, B %.4f)",
                     res.mean_final, res.mean_A, res.mean_B)
            if cfg.env == "grid":
                log.info("epsilon_A %.4f, max_b %.4f, all valid %s",
                         res.epsilon_A, res.max_b, res.all_valid)
        else:
            missing = ex.missing_files(out)
            if missing:
                log.error("%s is incomplete, missing: %s", out, ", ".join(missing))
                return 1
            log.info("%s is complete", out)
    except ex.TrainingAborted as exc:
        log.error("%s (cause: %s)", exc, exc.__cause__)
        return 1
    except (FileNotFoundError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
