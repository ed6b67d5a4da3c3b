"""Discretized near-eigenfunction (Weyl) sequence residuals.

The n-th element lives on the wedge of the smallest dihedral angle: the 2D
waveguide eigenfunction times a longitudinal plane wave, windowed in the
axial coordinate to [2^n, 2^(n+1)] and cut off transversally at the outlet
length available at the window's near end.  The factorized structure makes
the residual norm a combination of four 1D window integrals and three 2D
grid integrals; the transverse Laplacian is evaluated with second-order
finite differences on a Cartesian sampling of the finite-element field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..geometry import LayerGeometry
from ..mesh2d import evaluate_batch
from .waveguide import AnalysisError, WaveguideMode, WaveguideNumerics, solve_waveguide_mode


def smoothstep(t):
    """Quintic smoothstep: 0 below 0, 1 above 1, C^2 in between."""
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def smoothstep_d1(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    out = np.zeros_like(t)
    ti = t[inside]
    out[inside] = 30.0 * ti**2 * (1.0 - ti) ** 2
    return out


def smoothstep_d2(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    out = np.zeros_like(t)
    ti = t[inside]
    out[inside] = 60.0 * ti * (1.0 - ti) * (1.0 - 2.0 * ti)
    return out


@dataclass(frozen=True)
class WeylConfig:
    """Parameters of one Weyl-sequence element.

    ``z_width`` is the transition width of the axial window (the support
    stays inside [2^n, 2^(n+1)]); ``chi_width`` the transverse cutoff
    transition; ``h_grid`` the finite-difference spacing; ``x_cut`` caps the
    simulated outlet length (the eigenfunction is exponentially negligible
    beyond it).
    """

    index: int
    kappa: float = 0.0
    h_grid: float = 0.08
    z_width: float = 0.35
    chi_width: float = 1.0
    x_cut: float = 14.0
    mode_numerics: WaveguideNumerics = WaveguideNumerics(h=0.04, levels=2, R=16.0)

    def __post_init__(self):
        if self.index < 1:
            raise AnalysisError("window index must be >= 1")
        if self.kappa < 0.0:
            raise AnalysisError("longitudinal frequency must be >= 0")


@dataclass(eq=False)
class WeylElement:
    """Residual data of one sequence element."""

    index: int
    kappa: float
    residual: float
    norm: float
    z_support: tuple
    outlet_length: float
    detail: dict

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "kappa": self.kappa,
            "residual": self.residual,
            "norm": self.norm,
            "z_support": list(self.z_support),
            "outlet_length": self.outlet_length,
        }


def _window_integrals(n: int, width: float):
    """Integrals of the axial window and its derivatives over [2^n, 2^(n+1)].

    The window is S((z - 2^n)/w) * S((2^(n+1) - z)/w) with the quintic
    smoothstep S, so its support is exactly the dyadic block.
    """
    z0, z1 = 2.0**n, 2.0 ** (n + 1)
    m = 20_001
    z = np.linspace(z0, z1, m)
    w = width
    a = (z - z0) / w
    b = (z1 - z) / w
    X = smoothstep(a) * smoothstep(b)
    X1 = (smoothstep_d1(a) * smoothstep(b) - smoothstep(a) * smoothstep_d1(b)) / w
    X2 = (
        smoothstep_d2(a) * smoothstep(b)
        - 2.0 * smoothstep_d1(a) * smoothstep_d1(b)
        + smoothstep(a) * smoothstep_d2(b)
    ) / (w * w)

    def simpson(f):
        return float(
            (z[1] - z[0]) / 3.0 * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum() + 2.0 * f[2:-1:2].sum())
        )

    return {
        "I2": simpson(X * X),
        "I11": simpson(X * X2),
        "I22": simpson(X2 * X2),
        "I1": simpson(X1 * X1),
    }


def _transverse_fields(layer, mode, config, outlet_len):
    """Sampled B = v * chi and A = -FD_Lap(B) - lambda B on a Cartesian grid.

    Returns sums over the resolved interior (stencil fully inside the
    domain) plus the norm of B over the whole inside region.
    """
    mesh = mode.mesh
    v = mode.values[:, 0]
    lam = float(mode.eigenvalues[0])
    theta = layer.beta_min
    half = theta / 2.0
    inner = np.array([1.0 / math.sin(half), 0.0])
    d1 = np.array([math.cos(half), math.sin(half)])
    d2 = np.array([math.cos(half), -math.sin(half)])

    h = config.h_grid
    keep = min(outlet_len, config.x_cut)
    x_max = float((1.0 / math.tan(half) + keep) * math.cos(half) + 2 * h)
    y_max = float((1.0 / math.tan(half) + keep) * math.sin(half) + 2 * h)
    xs = np.arange(-2 * h, x_max, h)
    ys = np.arange(-y_max, y_max, h)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)

    vals, inside = evaluate_batch(mesh, v, pts)
    V = vals.reshape(X.shape)
    IN = inside.reshape(X.shape)

    s1 = (pts - inner) @ d1
    s2 = (pts - inner) @ d2
    chi = (
        smoothstep((outlet_len - s1) / config.chi_width)
        * smoothstep((outlet_len - s2) / config.chi_width)
    ).reshape(X.shape)
    B = V * chi
    B[~IN] = 0.0

    lap = np.zeros_like(B)
    lap[1:-1, 1:-1] = (
        B[2:, 1:-1] + B[:-2, 1:-1] + B[1:-1, 2:] + B[1:-1, :-2] - 4.0 * B[1:-1, 1:-1]
    ) / (h * h)
    stencil_ok = np.zeros_like(IN)
    stencil_ok[1:-1, 1:-1] = (
        IN[1:-1, 1:-1] & IN[2:, 1:-1] & IN[:-2, 1:-1] & IN[1:-1, 2:] & IN[1:-1, :-2]
    )
    A = -lap - lam * B

    cell = h * h
    a2 = float((A[stencil_ok] ** 2).sum() * cell)
    ab = float((A[stencil_ok] * B[stencil_ok]).sum() * cell)
    b2_res = float((B[stencil_ok] ** 2).sum() * cell)
    b2_all = float((B[IN] ** 2).sum() * cell)
    return a2, ab, b2_res, b2_all


def weyl_residual(
    layer: LayerGeometry, config: WeylConfig, mode: Optional[WaveguideMode] = None
) -> WeylElement:
    """Relative residual of the n-th discretized Weyl element.

    The residual factorizes over the axial window:  with A = -Lap_2D(B) -
    lambda B and B = v * chi, the squared norm of the defect equals
    I2 |A|^2 - 2 I11 <A, B> + (I22 + 4 kappa^2 I1) |B|^2, divided by the
    squared element norm I2 |B|^2.
    """
    if config.h_grid > config.z_width / 4.0 or config.h_grid > config.chi_width / 4.0:
        raise AnalysisError(
            "grid too coarse relative to the cut-off derivative scale"
        )
    n = config.index
    a = layer.angle.vertex_angles
    beta = layer.angle.dihedral_angles
    j = int(np.argmin(beta))
    alpha_adj = min(float(a[(j - 1) % layer.n]), float(a[j]))
    slope = math.tan(alpha_adj / 2.0)
    outlet_len = slope * 2.0**n  # smallest outlet at the window's near end

    if mode is None:
        mode = solve_waveguide_mode(layer.beta_min, config.mode_numerics)

    zi = _window_integrals(n, config.z_width)
    a2, ab, b2_res, b2_all = _transverse_fields(layer, mode, config, outlet_len)

    num2 = zi["I2"] * a2 - 2.0 * zi["I11"] * ab + (
        zi["I22"] + 4.0 * config.kappa**2 * zi["I1"]
    ) * b2_res
    den2 = zi["I2"] * b2_all
    norm = math.sqrt(2.0 ** (-n) * zi["I2"] * b2_all)
    return WeylElement(
        index=n,
        kappa=config.kappa,
        residual=math.sqrt(max(num2, 0.0) / den2),
        norm=norm,
        z_support=(2.0**n, 2.0 ** (n + 1)),
        outlet_length=outlet_len,
        detail={"window": zi, "A2": a2, "AB": ab, "B2": b2_res, "B2_all": b2_all},
    )


def support_overlap(n: int, m: int, width: float) -> float:
    """L2 overlap of the axial windows n and m (0 for distinct blocks)."""
    if n == m:
        return _window_integrals(n, width)["I2"]
    lo = max(2.0**n, 2.0**m)
    hi = min(2.0 ** (n + 1), 2.0 ** (m + 1))
    if hi <= lo:
        return 0.0
    z = np.linspace(lo, hi, 4001)

    def window(k):
        return smoothstep((z - 2.0**k) / width) * smoothstep((2.0 ** (k + 1) - z) / width)

    prod = window(n) * window(m)
    return float(np.trapezoid(prod, z))
