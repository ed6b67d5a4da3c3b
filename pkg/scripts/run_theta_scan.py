#!/usr/bin/env python3
"""Opening-angle scan: extrapolated lambda_1 over a theta grid, with CSV and
SVG outputs.  Reproduces the monotonicity picture between pi^2/4 and pi^2."""

import argparse
import math

import numpy as np

from polylayer.analysis import WaveguideNumerics, scan_theta
from polylayer.report import write_csv, write_svg_lines


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lo", type=float, default=0.3)
    ap.add_argument("--hi", type=float, default=2.9)
    ap.add_argument("--points", type=int, default=12)
    ap.add_argument("--h", type=float, default=0.1)
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--out", default="theta_scan")
    args = ap.parse_args()

    scan = scan_theta(
        np.linspace(args.lo, args.hi, args.points),
        WaveguideNumerics(h=args.h, levels=args.levels),
    )
    rows = [
        [r.parameter, r.eigenvalues[0], r.error_indicators[0], r.R, r.h, r.levels]
        for r in scan.records
    ]
    write_csv(f"{args.out}.csv", ["theta", "lambda1", "indicator", "R", "h", "levels"], rows)
    xs = [r.parameter for r in scan.records]
    ys = [r.eigenvalues[0] for r in scan.records]
    write_svg_lines(
        f"{args.out}.svg",
        {"lambda1(theta)": (xs, ys)},
        "theta (rad)",
        "lambda1",
        {"pi^2": math.pi**2, "pi^2/4": math.pi**2 / 4},
    )
    print(f"strictly increasing: {scan.strictly_increasing}")
    print(f"inside (pi^2/4, pi^2): {scan.inside_band}")
    for x, y in zip(xs, ys):
        print(f"  theta = {x:6.3f}   lambda1 = {y:9.5f}")


if __name__ == "__main__":
    main()
