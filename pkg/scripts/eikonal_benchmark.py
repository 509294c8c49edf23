#!/usr/bin/env python3
"""Accuracy and timing of the fast-marching Eikonal solver.

Benchmarks against two closed-form oracles across resolutions: the Euclidean
distance under uniform cost, and the broken-ray (two-region refraction)
travel time under a piecewise-constant cost.

Example:
    python3 scripts/eikonal_benchmark.py --resolutions 64 128 256 512
"""

import argparse
import math
import time

import numpy as np
from scipy.optimize import minimize_scalar

from powerpath.geodesic import CostGrid, interpolate, solve_eikonal
from powerpath.geometry import Domain


def uniform_error(res: int) -> tuple[float, float]:
    box = Domain("box", (1.0, 1.0))
    grid = CostGrid(box, res, np.ones((res, res)), wraparound=False)
    t0 = time.perf_counter()
    field = solve_eikonal(grid, np.array([0.5, 0.5]))
    elapsed = time.perf_counter() - t0
    cx = (np.arange(res) + 0.5) / res
    X, Y = np.meshgrid(cx, cx, indexing="ij")
    err = np.abs(field.values - np.hypot(X - 0.5, Y - 0.5))
    return float(err.max()) * res, elapsed  # in cell units


def refraction_error(res: int, c1: float = 1.0, c2: float = 2.0) -> float:
    box = Domain("box", (1.0, 1.0))
    xs = (np.arange(res) + 0.5) / res
    vals = np.where(xs[:, None] < 0.5, c1, c2) * np.ones((res, res))
    grid = CostGrid(box, res, vals, wraparound=False)
    src, tgt = np.array([0.25, 0.3]), np.array([0.75, 0.7])
    field = solve_eikonal(grid, src)

    def travel(yc):
        return c1 * math.hypot(0.5 - src[0], yc - src[1]) + \
            c2 * math.hypot(tgt[0] - 0.5, tgt[1] - yc)

    oracle = minimize_scalar(travel, bounds=(0.0, 1.0), method="bounded",
                             options={"xatol": 1e-12}).fun
    return abs(interpolate(field, tgt) - oracle) / oracle


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolutions", type=int, nargs="+",
                    default=[64, 128, 256])
    args = ap.parse_args()

    print(f"{'res':>6} {'max err (cells)':>16} {'refraction rel':>15} "
          f"{'solve time':>11}")
    for res in args.resolutions:
        cells, elapsed = uniform_error(res)
        rel = refraction_error(res)
        print(f"{res:6d} {cells:16.3f} {rel:15.4%} {elapsed:10.2f}s")


if __name__ == "__main__":
    main()
