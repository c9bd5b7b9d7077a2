"""Linear limit W = 0, ζ = 0: eigenvalues against the exact 2π² of the unit square.

    python3 scripts/linear_anchor.py --levels 4 --out results/linear
"""
import argparse
import math

from cmgpe.harness import StudyConfig, fit_slope, run_study

EXACT = 2 * math.pi**2


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--cells", type=int, default=8)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--smoother", default="cg")
    p.add_argument("--out", default="results/linear")
    args = p.parse_args(argv)
    cfg = StudyConfig(cells_per_side=args.cells, levels=args.levels, gamma=(0.0, 0.0), zeta=0.0,
                      smoother=args.smoother, modes=("cascadic", "direct"), out=args.out)
    res = run_study(cfg)
    print(f"{'1/h':>6} {'cascadic':>16} {'direct':>16} {'rel.err':>10}")
    pts = []
    for row, d in zip(res.cascadic.rows, res.direct):
        inv = args.cells * 2 ** (row["level"] - 1)
        err = abs(row["lambda"] - EXACT)
        pts.append((1.0 / inv, err))
        print(f"{inv:>6} {row['lambda']:>16.10f} {d['lambda']:>16.10f} {err / EXACT:>10.2e}")
    print(f"exact 2*pi^2 = {EXACT:.10f}; fitted eigenvalue error slope = {fit_slope(pts):.3f}")


if __name__ == "__main__":
    main()
