"""Richardson extrapolation for mesh-halving eigenvalue sequences."""

from __future__ import annotations

import numpy as np


def richardson(values, order: float = 2.0, ratio: float = 2.0):
    """Eliminate the leading O(h^order) error from a halving sequence.

    ``values`` are estimates on meshes h, h/ratio, h/ratio^2, ...  Returns
    (extrapolated, error_indicator, extrapolants).  The indicator is the
    difference of the last two extrapolants; with only two input values it is
    the magnitude of the single Richardson correction, a conservative bound.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError("extrapolation needs at least two mesh levels")
    factor = ratio**order
    ext = (factor * v[1:] - v[:-1]) / (factor - 1.0)
    value = float(ext[-1])
    if ext.size >= 2:
        indicator = abs(float(ext[-1] - ext[-2]))
    else:
        indicator = abs(float(ext[-1] - v[-1]))
    return value, indicator, ext
