"""Follow one disorder path through growing boxes and print N_L(E)/beta_L.

Several realizations are shown side by side so the pathwise scatter is visible.

    python3 scripts/pointwise_trajectory.py --ladder 10,20,40 --paths 4
"""

import argparse

from lattice_ids import ModelParams
from lattice_ids.estimators import pointwise_bounds, pointwise_trajectory


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--alpha", type=float, default=0.4)
    ap.add_argument("--delta", type=float, default=1.2)
    ap.add_argument("--E", type=float, default=-5.0)
    ap.add_argument("--ladder", default="10,20,40")
    ap.add_argument("--paths", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--force", action="store_true", help="run outside the almost-sure regime")
    args = ap.parse_args()

    ladder = [int(v) for v in args.ladder.split(",")]
    plist = [ModelParams(args.d, L, args.alpha, args.delta) for L in ladder]
    lo, hi = pointwise_bounds(plist[0], args.E)
    print(f"almost-sure window for N_L/beta_L: [{lo:.5f}, {hi:.5f}]")
    paths = [pointwise_trajectory(plist, args.E, args.seed, k, force=args.force) for k in range(args.paths)]
    print(f"{'L':>4} " + " ".join(f"{'path ' + str(k):>9}" for k in range(args.paths)) + f" {'sigma':>9}")
    for i, L in enumerate(ladder):
        vals = " ".join(f"{paths[k][i].normalized:9.5f}" for k in range(args.paths))
        print(f"{L:4d} {vals} {paths[0][i].sigma_exact:9.5f}")


if __name__ == "__main__":
    main()
