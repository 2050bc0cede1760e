"""Dressed-pair field equation in three dimensions.

Runs the massless d=3 scenarios and prints every stage check. With --cutoffs it
also reports how the closed-form agreement of the numerical amplitudes changes
with the excitation cutoff for the dressed vacuum.
"""
import argparse
import dataclasses
import tempfile
from pathlib import Path

from vanhove.pipeline import run_scenario
from vanhove.scenario import parse_scenario

ROOT = Path(__file__).resolve().parent.parent / "scenarios"


def report(result, label):
    print(f"\n== {label}: exit status {result.status}")
    for st in result.stages:
        for name, chk in st.checks.items():
            val = "" if chk.value is None else f"{chk.value:.3e}"
            tol = "" if chk.tolerance is None else f"tol {chk.tolerance:.1e}"
            print(f"  [{'ok  ' if chk.passed else 'FAIL'}] {st.name}.{name:28s} {val:>11s} {tol} {chk.note}")
        if st.error:
            print(f"  [FAIL] {st.name}: {st.error}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cutoffs", default="", help="comma separated N values, e.g. 1,2")
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args(argv)
    out = args.out or Path(tempfile.mkdtemp(prefix="vanhove_d3_"))

    for name in ("reference_d3", "one_particle_d3", "gaussian_d3"):
        sc = parse_scenario(ROOT / f"{name}.ini")
        report(run_scenario(sc, out / name), name)

    if args.cutoffs:
        sc = parse_scenario(ROOT / "reference_d3.ini")
        print("\n== dressed vacuum, closed-form agreement by cutoff")
        for N in (int(x) for x in args.cutoffs.split(",")):
            res = run_scenario(dataclasses.replace(sc, N=N), out / f"cutoff_{N}")
            evo = next((s for s in res.stages if s.name == "evolution"), None)
            if evo is None:
                print(f"  N={N}: no evolution stage (status {res.status})")
                continue
            print(f"  N={N}: {evo.checks['closed_form_agreement'].value:.3e}")
    print(f"\noutputs in {out}")


if __name__ == "__main__":
    main()
