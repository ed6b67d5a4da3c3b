"""Finite-element assembly: P1 on triangles, trilinear Q1 on voxel cells.

Element matrices are closed-form (no quadrature knob).  Stiffness and mass
are stored upper-triangular and mirrored, so symmetry is exact in storage.
Dirichlet conditions are imposed by row/column elimination, keeping the
reduced stiffness positive definite.

Assembly accumulates element contributions in a fixed element order, so the
matrices are bit-identical across runs regardless of thread counts used by
the underlying BLAS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import fsum
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .grid3d import GridError, VoxelGrid
from .mesh2d import TriMesh


class AssemblyError(ValueError):
    """Raised for degenerate elements or empty problems."""


@dataclass(eq=False)
class SparseSymmetric:
    """Symmetric sparse matrix stored as its upper triangle.

    The mirrored full matrix reuses the stored floats, so the symmetry
    defect is exactly zero.
    """

    n: int
    upper: sp.csr_matrix

    _full: Optional[sp.csr_matrix] = None

    @classmethod
    def from_upper_coo(cls, n, rows, cols, vals) -> "SparseSymmetric":
        upper = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        upper.sum_duplicates()
        return cls(n=n, upper=upper)

    @property
    def full(self) -> sp.csr_matrix:
        if self._full is None:
            diag = sp.diags(self.upper.diagonal())
            full = (self.upper + self.upper.T - diag).tocsr()
            full.sum_duplicates()
            self._full = full
        return self._full

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.full @ x

    def symmetry_defect(self) -> float:
        d = self.full - self.full.T
        return float(np.abs(d.data).max()) if d.nnz else 0.0

    def submatrix(self, keep: np.ndarray) -> "SparseSymmetric":
        sub = self.upper[keep][:, keep].tocsr()
        return SparseSymmetric(n=int(len(keep)), upper=sub)

    def entries_sum(self) -> float:
        diag = self.upper.diagonal().sum()
        return float(2.0 * self.upper.sum() - diag)


@dataclass(eq=False)
class DiscreteProblem:
    """Reduced SPD pencil (K, M) with the node <-> equation bookkeeping.

    ``free_nodes[eq]`` is the mesh/grid node behind equation ``eq``;
    ``node_to_eq`` is -1 on eliminated (Dirichlet) nodes.  ``K_raw`` and
    ``M_raw`` keep the pre-elimination matrices for audits.
    """

    K: SparseSymmetric
    M: SparseSymmetric
    free_nodes: np.ndarray
    node_to_eq: np.ndarray
    K_raw: SparseSymmetric
    M_raw: SparseSymmetric
    provenance: str = ""

    @property
    def n(self) -> int:
        return self.K.n

    def expand(self, vec: np.ndarray) -> np.ndarray:
        """Zero-padded nodal field from an equation-sized vector."""
        out = np.zeros(self.node_to_eq.shape[0])
        out[self.free_nodes] = vec
        return out


def _emit_upper(global_ids: np.ndarray, element: np.ndarray):
    """COO triplets of element contributions mapped to the global upper
    triangle; (rows, cols, vals) with rows <= cols."""
    n_loc = element.shape[0]
    ii, jj = np.triu_indices(n_loc)
    # element matrix symmetric: entry (a, b) with a <= b locally covers both
    ga = global_ids[:, ii]
    gb = global_ids[:, jj]
    rows = np.minimum(ga, gb).ravel()
    cols = np.maximum(ga, gb).ravel()
    vals = np.broadcast_to(element[ii, jj], ga.shape).ravel()
    return rows, cols, vals


def _emit_upper_varying(global_ids: np.ndarray, elements: np.ndarray):
    n_loc = elements.shape[1]
    ii, jj = np.triu_indices(n_loc)
    ga = global_ids[:, ii]
    gb = global_ids[:, jj]
    rows = np.minimum(ga, gb).ravel()
    cols = np.maximum(ga, gb).ravel()
    vals = elements[:, ii, jj].ravel()
    return rows, cols, vals


def assemble_p1(mesh: TriMesh) -> DiscreteProblem:
    """Exact P1 stiffness and consistent mass on a triangle mesh.

    Dirichlet-tagged boundary nodes are eliminated; Neumann sides are natural.
    """
    tris = mesh.triangles
    pts = mesh.nodes[tris]
    x = pts[..., 0]
    y = pts[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (
        (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
        - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    )
    bad = area <= 1e-14 * np.maximum(1.0, np.abs(x).max())
    if bad.any():
        raise AssemblyError(f"degenerate triangle at index {int(np.argmax(bad))}")

    Ke = (
        b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]
    ) / (4.0 * area[:, None, None])
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    Me = area[:, None, None] * base[None, :, :]

    n = mesh.num_nodes
    rk = _emit_upper_varying(tris, Ke)
    rm = _emit_upper_varying(tris, Me)
    K_raw = SparseSymmetric.from_upper_coo(n, *rk)
    M_raw = SparseSymmetric.from_upper_coo(n, *rm)

    fixed = np.zeros(n, dtype=bool)
    fixed[mesh.dirichlet_nodes()] = True
    return _reduce(K_raw, M_raw, fixed, provenance=f"p1:{n}nodes")


_Q1_CACHE: dict = {}


def q1_element_matrices(h: float):
    """Closed-form 8x8 trilinear stiffness/mass for a cube of side h.

    Local node order follows the Kronecker convention: index = 4*ix + 2*iy
    + iz over corner offsets (ix, iy, iz).
    """
    cached = _Q1_CACHE.get(h)
    if cached is not None:
        return cached
    s1 = np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
    m1 = h * np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    K8 = (
        np.kron(np.kron(s1, m1), m1)
        + np.kron(np.kron(m1, s1), m1)
        + np.kron(np.kron(m1, m1), s1)
    )
    M8 = np.kron(np.kron(m1, m1), m1)
    _Q1_CACHE[h] = (K8, M8)
    return K8, M8


def assemble_q1(grid: VoxelGrid) -> DiscreteProblem:
    """Trilinear stiffness and consistent mass on the active voxel cells."""
    cells = grid.active_cell_corners()
    if len(cells) == 0:
        raise GridError("no active cells to assemble")
    K8, M8 = q1_element_matrices(grid.h)
    n = grid.num_nodes
    K_raw = SparseSymmetric.from_upper_coo(n, *_emit_upper(cells, K8))
    M_raw = SparseSymmetric.from_upper_coo(n, *_emit_upper(cells, M8))
    fixed = grid.dirichlet.copy()
    if not (~fixed).any():
        raise AssemblyError("all nodes are Dirichlet: empty problem")
    return _reduce(K_raw, M_raw, fixed, provenance=f"q1:{grid.num_active_cells}cells")


def _reduce(
    K_raw: SparseSymmetric, M_raw: SparseSymmetric, fixed: np.ndarray, provenance: str
) -> DiscreteProblem:
    free = np.flatnonzero(~fixed)
    if len(free) == 0:
        raise AssemblyError("all nodes are Dirichlet: empty problem")
    node_to_eq = np.full(fixed.shape[0], -1, dtype=np.int64)
    node_to_eq[free] = np.arange(len(free))
    return DiscreteProblem(
        K=K_raw.submatrix(free),
        M=M_raw.submatrix(free),
        free_nodes=free,
        node_to_eq=node_to_eq,
        K_raw=K_raw,
        M_raw=M_raw,
        provenance=provenance,
    )


def rayleigh_quotient(problem: DiscreteProblem, vec: np.ndarray) -> float:
    """(v' K v) / (v' M v) with compensated summation of the products."""
    vec = np.asarray(vec, dtype=float)
    Kv = problem.K.matvec(vec)
    Mv = problem.M.matvec(vec)
    num = fsum((vec * Kv).tolist())
    den = fsum((vec * Mv).tolist())
    if den <= 0.0:
        raise AssemblyError("vector has zero M-norm")
    return num / den


def dump_matrix(matrix: SparseSymmetric, path) -> None:
    """Coordinate text dump (row, col, value) of the full symmetric matrix."""
    coo = matrix.full.tocoo()
    with open(path, "w") as f:
        f.write(f"# symmetric sparse {matrix.n} x {matrix.n}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            f.write(f"{i} {j} {v!r}\n")
