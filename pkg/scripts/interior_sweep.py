"""Interior spectral fraction in (M1, M2) for growing boxes, with its envelope.

    python3 scripts/interior_sweep.py --ladder 5,10,20 --trials 100
"""

import argparse

from lattice_ids import ModelParams
from lattice_ids.estimators import interior_fraction


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--delta", type=float, default=2.0)
    ap.add_argument("--M1", type=float, default=-5.0)
    ap.add_argument("--M2", type=float, default=5.0)
    ap.add_argument("--ladder", default="5,10,20")
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'L':>4} {'estimate':>10} {'stderr':>9} {'env_lo':>9} {'env_hi':>9} {'below':>9} {'above':>9}")
    for L in (int(v) for v in args.ladder.split(",")):
        p = ModelParams(args.d, L, args.alpha, args.delta)
        r = interior_fraction(p, args.M1, args.M2, trials=args.trials, master_seed=args.seed)
        lo, hi = r.details["envelope"]
        below, above = r.details["tail_below"]["estimate"], r.details["tail_above"]["estimate"]
        print(f"{L:4d} {r.estimate:10.5f} {r.stderr:9.5f} {lo:9.5f} {hi:9.5f} {below:9.5f} {above:9.5f}")


if __name__ == "__main__":
    main()
