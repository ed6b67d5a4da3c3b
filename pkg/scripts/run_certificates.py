#!/usr/bin/env python3
"""Existence certificates at desk scale: the Fichera layer upper bound and
the exponential trial-function certificate for the three regular layers."""

import argparse
import math

import numpy as np

from polylayer.analysis import certify_discrete, veps_certificate
from polylayer.geometry import build_regular, fichera_angle, make_layer


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--R", type=float, default=6.0)
    ap.add_argument("--h", type=float, default=0.1)
    ap.add_argument("--levels", type=int, default=2)
    args = ap.parse_args()

    layer = make_layer(fichera_angle())
    cert = certify_discrete(layer, R=args.R, h=args.h, levels=args.levels)
    print("Fichera upper-bound certificate:")
    print(f"  threshold  {cert.threshold_value:.6f} +- {cert.threshold_indicator:.1e}")
    print(f"  bound      {cert.evidence['upper_bound']:.6f}")
    print(f"  margin     {cert.margin:.6f}   verdict {cert.verdict}")

    for n, alpha in ((3, math.pi / 3), (3, math.pi / 2), (4, math.pi / 3)):
        reg = make_layer(build_regular(n, alpha))
        vc = veps_certificate(reg, eps_grid=np.geomspace(1e-3, 1.0, 13))
        print(f"V^eps certificate, regular({n}, {alpha:.4f}):")
        print(
            f"  min value {vc.evidence['best_value']:.6f} at eps = "
            f"{vc.evidence['best_eps']:.4g}   verdict {vc.verdict}"
        )


if __name__ == "__main__":
    main()
