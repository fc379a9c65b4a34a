"""Command line: ``python -m nsdensity <command> --config FILE --set key=value``."""
from __future__ import annotations

import argparse
import sys

from . import experiments
from .config import ConfigError, load_config
from .ensemble import WORKERS_ENV


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nsdensity",
        description="Time regularity of F-marginal densities of the stochastic Galerkin system.",
        epilog=f"The worker count can be overridden with the {WORKERS_ENV} environment variable.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("l1-holder", "fit the L1 Hoelder exponent in time"),
                       ("besov-holder", "fit the Besov-distance Hoelder exponent in time"),
                       ("diagnostics", "run structural and Monte-Carlo checks"),
                       ("timedep", "growth of the Besov norm as t -> 0")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", help="flat key = value file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
        sp.add_argument("--out", default=".", help="output directory (default: .)")
        sp.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    return p


def _report_holder(name: str, res: experiments.HolderResult) -> int:
    t = res.table
    print(f"{name}: {int(t.used.sum())}/{len(t.pairs)} pairs above noise floor {t.noise_floor:.4g}")
    if res.fit is None:
        print(f"{name}: fit refused: {res.refused}")
        return 1
    print(f"{name}: slope {res.fit.slope:.4f} +/- {res.fit.slope_stderr:.4f}, r2 {res.fit.r_squared:.4f}")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if args.command == "besov-holder":
            cfg.validate_besov()
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        sys.stdout.write(cfg.to_text())
        return 0
    try:
        if args.command == "l1-holder":
            return _report_holder("l1", experiments.run_l1_holder(cfg, args.out))
        if args.command == "besov-holder":
            return _report_holder("besov", experiments.run_besov_holder(cfg, args.out))
        if args.command == "timedep":
            r = experiments.run_timedep(cfg, args.out)
            print(f"timedep: small-t exponent {r.fit.slope:.4f}, r2 {r.fit.r_squared:.4f}")
            return 0
        rows = experiments.run_diagnostics(cfg, args.out)
        for r in rows:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.prop}  {r.measured:.4g}  (tol {r.tolerance})")
        return 0 if all(r.passed for r in rows) else 1
    except experiments.BlowUpAbort as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
