"""Run the harmonic-trap study once per smoother kind and tabulate slopes and work.

    python3 scripts/smoother_comparison.py --levels 4
"""
import argparse
import os

from cmgpe.harness import StudyConfig, run_study
from cmgpe.smoother import KINDS


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--cells", type=int, default=6)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--out", default="results/smoothers")
    args = p.parse_args(argv)
    print(f"{'smoother':>10} {'h1 slope':>9} {'lam slope':>9} {'work':>12} {'err_h1(n)':>10}")
    for kind in KINDS:
        cfg = StudyConfig(cells_per_side=args.cells, levels=args.levels, smoother=kind,
                          modes=("cascadic",), plots=False, out=os.path.join(args.out, kind))
        t = run_study(cfg).cascadic
        last = t.rows[-1]
        print(f"{kind:>10} {t.slopes['err_h1']:>9.3f} {t.slopes['err_lambda']:>9.3f} "
              f"{last['work']:>12d} {last['err_h1']:>10.3e}")


if __name__ == "__main__":
    main()
