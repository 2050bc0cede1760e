"""Quadrature ladders for the infrared conditions across source families.

Prints one block per (source, dimension, dispersion) with the refined sums, the
Cauchy ratios and the verdict, plus the inverse-cube ladder on the unit ball.
"""
import argparse

import numpy as np

from vanhove.conditions import CONDITIONS, cauchy_verdict, check_conditions, quadrature_ladder
from vanhove.model import Dispersion, gaussian_source, neutral_gaussian_source

SOURCES = {"gaussian": gaussian_source, "neutral_gaussian": neutral_gaussian_source}


def show(report, label):
    print(f"\n== {label}  (small-k exponent {report.small_k_exponent:.4f})")
    for name in CONDITIONS:
        res = report.results[name]
        vals = " ".join(f"{v:11.5g}" for v in res.values)
        ratios = " ".join(f"{r:6.3f}" for r in res.ratios)
        print(f"  {name:28s} {res.verdict:12s} values [{vals}] ratios [{ratios}]")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--mass", type=float, default=1.0)
    args = ap.parse_args(argv)

    for kind, make in SOURCES.items():
        for d in (1, 3):
            profile = make(1.0, args.sigma, 1.0, d)
            for disp in (Dispersion.massless(), Dispersion.massive(args.mass)):
                show(check_conditions(profile, disp), f"{kind}, d={d}, {disp.kind}")

    ball = lambda k: np.where(np.linalg.norm(k, axis=1) <= 1.0, np.linalg.norm(k, axis=1) ** -3.0, 0.0)
    values, _ = quadrature_ladder(ball, 3, 1.0, [8, 16, 32, 64, 128])
    verdict, ratios = cauchy_verdict(values)
    print("\n== |k|^-3 on the unit ball, d=3")
    print("  values", " ".join(f"{v:.5g}" for v in values))
    print("  increments", " ".join(f"{v:.5g}" for v in np.diff(values)), f"(4 pi log 2 = {4 * np.pi * np.log(2):.5g})")
    print("  verdict", verdict, "ratios", " ".join(f"{r:.3f}" for r in ratios))


if __name__ == "__main__":
    main()
