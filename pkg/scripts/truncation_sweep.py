"""Convergence tables for a scenario along the N, n, K and h axes."""
import argparse
from pathlib import Path

from vanhove.pipeline import convergence_sweep, write_sweep
from vanhove.scenario import parse_scenario


def fmt(v):
    return f"{v:.4e}" if isinstance(v, float) else str(v)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scenario", nargs="?", default=str(Path(__file__).resolve().parent.parent
                                                       / "scenarios" / "massive_d1.ini"))
    ap.add_argument("--axes", default="N,n,K,h")
    ap.add_argument("--out", type=Path, default=None, help="write sweep_<axis>.csv here")
    args = ap.parse_args(argv)

    sc = parse_scenario(args.scenario)
    for axis in args.axes.split(","):
        table = convergence_sweep(sc, axis.strip())
        print(f"\n== sweep over {table.axis}" + ("  (truncated)" if table.truncated else ""))
        print("  " + "  ".join(f"{h:>24s}" for h in table.header))
        for row in table.rows:
            print("  " + "  ".join(f"{fmt(v):>24s}" for v in row))
        for name, ok in table.monotone.items():
            print(f"  {name} strictly decreasing: {ok}")
        if args.out:
            write_sweep(table, args.out)


if __name__ == "__main__":
    main()
