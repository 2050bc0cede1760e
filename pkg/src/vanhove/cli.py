"""Command-line entry point: ``run``, ``check-conditions`` and ``sweep`` on a scenario file."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .fock import CapacityError
from .model import ProfileError
from .pipeline import STATUS, convergence_sweep, run_conditions, run_scenario, write_sweep
from .scenario import InfraredRiskError, ScenarioError, parse_scenario

# configuration problems, before any stage runs
EXIT_CONFIG = 2


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", type=Path, help="scenario file")
    common.add_argument("--allow-ir-risk", action="store_true",
                        help="run massless fields below d = 3 and past violated infrared conditions")
    common.add_argument("--seed", type=_u64, default=None, help="override the scenario seed")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="vanhove", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="full pipeline with reports")
    sub.add_parser("check-conditions", parents=[common], help="infrared and integrability verdicts only")
    sw = sub.add_parser("sweep", parents=[common], help="convergence table along one axis")
    sw.add_argument("--axis", choices=["N", "n", "K", "h"], required=True)
    return parser


def _print_stages(result) -> None:
    for st in result.stages:
        mark = "ok  " if st.passed else "FAIL"
        print(f"[{mark}] {st.name}" + (f": {st.error}" if st.error else ""))
        for name, c in st.checks.items():
            val = "" if c.value is None else f" value={c.value:.3e}"
            tol = "" if c.tolerance is None else f" tol={c.tolerance:.1e}"
            print(f"    {'pass' if c.passed else 'FAIL'} {name}{val}{tol} {c.note}".rstrip())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        try:
            sc = parse_scenario(args.scenario, allow_ir_risk=args.allow_ir_risk)
        except InfraredRiskError as exc:
            if args.command == "sweep":
                raise
            # still classify the source so the report shows which conditions fail
            print(f"error: {exc}", file=sys.stderr)
            sc = dataclasses.replace(parse_scenario(args.scenario, allow_ir_risk=True), allow_ir_risk=False)
            result = run_conditions(sc, args.out or sc.output)
            _print_stages(result)
            return STATUS["conditions"]
        if args.seed is not None:
            sc = dataclasses.replace(sc, seed=args.seed)
        out = args.out or sc.output
        if args.command == "run":
            result = run_scenario(sc, out)
            _print_stages(result)
            print(f"exit status {result.status}; reports in {out}")
            return result.status
        if args.command == "check-conditions":
            result = run_conditions(sc, out)
            print(json.dumps(result.stages[0].info["report"]["conditions"], indent=1, default=str)
                  if args.verbose else "")
            _print_stages(result)
            return result.status
        table = convergence_sweep(sc, args.axis)
        path = write_sweep(table, Path(out))
        print(",".join(table.header))
        for row in table.rows:
            print(",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
        flags = ", ".join(f"{k}={'monotone' if v else 'NOT monotone'}" for k, v in table.monotone.items())
        print(f"{flags}{'; truncated by capacity cap' if table.truncated else ''}; table in {path}")
        return 0
    except (ScenarioError, ProfileError, CapacityError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
