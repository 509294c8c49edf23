#!/usr/bin/env python3
"""Finite-n convergence of n^((p-1)/d) L_n / dist_p on the flat torus.

Runs the rescaled-ratio experiment across an n schedule for one or more
densities and prints mean, stderr, and dispersion per cell.  The ratio should
stabilize (toward C(d, p)) with shrinking relative spread as n grows.

Example:
    python3 scripts/convergence_study.py --n 1000 10000 --trials 20 --seed 0
"""

import argparse

import numpy as np

from powerpath.estimation import convergence_experiment
from powerpath.geometry import ConformalParams, Domain


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--n", type=int, nargs="+", default=[1000, 10000])
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--densities", nargs="+", default=["uniform", "bump"],
                    choices=["uniform", "bump", "two_bump"])
    ap.add_argument("--resolution", type=int, default=256)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    domain = Domain("torus", (1.0, 1.0))
    params = ConformalParams(p=args.p, d=2)
    anchors = [(np.array([0.25, 0.5]), np.array([0.75, 0.5]))]

    print(f"torus ratio study: p={args.p} trials={args.trials} seed={args.seed}")
    print(f"{'density':>10} {'n':>8} {'ratio':>9} {'stderr':>8} "
          f"{'se/mean':>8} {'dist_p':>8}")
    for kind in args.densities:
        records = convergence_experiment(domain, {"kind": kind}, params,
                                         args.n, anchors, args.trials,
                                         args.seed, resolution=args.resolution,
                                         threads=args.threads)
        for rec in records:
            print(f"{kind:>10} {rec.params['n']:8d} {rec.value:9.4f} "
                  f"{rec.stderr:8.4f} {rec.stderr / rec.value:8.4f} "
                  f"{rec.params['dist_p']:8.4f}")


if __name__ == "__main__":
    main()
