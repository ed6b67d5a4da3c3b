"""Spectral computations for the Dirichlet Laplacian in 3D polyhedral layers.

The package computes essential-spectrum thresholds from L-shaped waveguide
eigenvalues, variational upper bounds certifying a nonempty discrete
spectrum, and parameter scans (monotonicity, truncation convergence,
eigenvalue counting) at desk scale.
"""

from .geometry import (
    GeometryError,
    LShapeProfile,
    LayerGeometry,
    PolyhedralAngle,
    build_regular,
    build_trihedral,
    classify_t51,
    fichera_angle,
    from_rays,
    lshape_profile,
    make_layer,
    parse_angle_spec,
)

__all__ = [
    "GeometryError",
    "LShapeProfile",
    "LayerGeometry",
    "PolyhedralAngle",
    "build_regular",
    "build_trihedral",
    "classify_t51",
    "fichera_angle",
    "from_rays",
    "lshape_profile",
    "make_layer",
    "parse_angle_spec",
]

__version__ = "0.1.0"
