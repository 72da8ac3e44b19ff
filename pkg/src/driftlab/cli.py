"""Command-line entry point: ``driftlab {simulate,infer,theory,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import SCENARIOS, load_config
from .report import cmd_report
from .runner import cmd_infer, cmd_simulate, cmd_theory

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="driftlab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH", help="TOML experiment configuration")
        sp.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
        sp.add_argument("--workers", type=int, metavar="N", help="worker processes")
        sp.add_argument("--seed-base", type=int, metavar="U64", help="base of the derived seeds")
        sp.add_argument("--scenario", choices=SCENARIOS, help="inference scenario")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("simulate", help="simulate and store one path per (T, seed)"))
    common(sub.add_parser("infer", help="posteriors and rate-table rows for stored paths"))
    common(sub.add_parser("theory", help="small-ball, RKHS and normalizer checks"))
    rp = sub.add_parser("report", help="merge rate tables; write plot data and figures")
    rp.add_argument("dirs", nargs="+", metavar="DIR")
    rp.add_argument("--out", metavar="DIR", required=True)
    rp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        if args.command == "report":
            result = cmd_report(args.dirs, args.out)
        else:
            if args.seed_base is not None and not 0 <= args.seed_base < 2**64:
                raise ValueError("--seed-base must be an unsigned 64-bit integer")
            cfg = load_config(args.config, out=args.out, workers=args.workers,
                              seed_base=args.seed_base, scenario=args.scenario)
            if args.command == "simulate":
                result = [str(f) for f in cmd_simulate(cfg)]
            elif args.command == "infer":
                result = {"rows": len(cmd_infer(cfg).rows), "out": cfg.out}
            else:
                result = cmd_theory(cfg)
    except (OSError, FileNotFoundError) as exc:
        print(f"driftlab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"driftlab: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(json.dumps(result, indent=2, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
