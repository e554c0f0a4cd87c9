"""Command line entry point: ``nlsflux {verify,simulate,sweep,spectrum}``.

Exit codes: 0 success, 1 a check or balance failed (or the stability guard
tripped), 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import RunConfig
from .integrator import StabilityError
from .model import ConfigurationError
from .stats import EstimationError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--relax", action="store_true", help="warn instead of aborting on the stability guard")
    common.add_argument("--cutoff", choices=("smooth", "sharp"))
    common.add_argument("--linear", action="store_true", help="disable the cubic nonlinearity")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="nlsflux", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run the deterministic check battery")
    sub.add_parser("simulate", parents=[common], help="burn-in, average, write diagnostics")
    sub.add_parser("sweep", parents=[common], help="run a (nu, sigma, lam) grid in parallel")
    sp = sub.add_parser("spectrum", parents=[common], help="shell spectrum, slopes and plots")
    sp.add_argument("--checkpoint", type=Path, help="resume from a checkpoint instead of burning in")
    return p


def load_config(args) -> RunConfig:
    overrides: dict = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.cutoff:
        overrides["cutoff"] = args.cutoff
    if args.relax:
        overrides["relax"] = "true"
    if args.linear:
        overrides["nonlinear"] = "false"
    if args.out is not None:
        overrides["out"] = str(args.out)
    if args.config is not None:
        return RunConfig.from_file(args.config, overrides)
    return RunConfig.from_mapping(overrides)


def _print_balance(res) -> bool:
    for r in res.balance.rows:
        flag = "pass" if r.passed else "FAIL"
        n = "" if r.N is None else f" N={r.N:g}"
        print(f"  {r.identity}{n}: residual {r.residual.mean:+.3e} +- {r.residual.stderr:.1e} "
              f"(relative {r.relative:.2e}) {flag}")
    return res.balance.passed


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        out = Path(cfg.out)
        if args.command == "verify":
            from .verify import run_battery

            out.mkdir(parents=True, exist_ok=True)
            passed, checks = run_battery(cfg, out / "verify_report.json")
            for c in checks:
                print(f"{'pass' if c.passed else 'FAIL'}  {c.name}  value={c.value:.3g}  tol={c.tolerance:.3g}")
            failed = [c.name for c in checks if not c.passed]
            if failed:
                print(f"verify: {len(failed)} of {len(checks)} checks failed: {', '.join(failed)}")
                return EXIT_FAIL
            print(f"verify: all {len(checks)} checks passed")
            return EXIT_OK
        from . import runner

        if args.command == "simulate":
            res = runner.simulate(cfg, out)
            print(f"simulate: outputs in {out}")
            return EXIT_OK if _print_balance(res) else EXIT_FAIL
        if args.command == "spectrum":
            res = runner.spectrum(cfg, out, args.checkpoint)
            print(f"spectrum: outputs in {out}")
            return EXIT_OK
        if args.command == "sweep":
            rows = runner.sweep(cfg, out)
            bad = [r for r in rows if r["status"] != "ok"]
            print(f"sweep: {len(rows) - len(bad)} of {len(rows)} points succeeded; table in {out / 'regime_table.csv'}")
            return EXIT_FAIL if bad else EXIT_OK
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StabilityError as exc:
        print(f"aborted by stability guard: {exc} (rerun with --relax or a smaller dt)", file=sys.stderr)
        return EXIT_FAIL
    except EstimationError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
