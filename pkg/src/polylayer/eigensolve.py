"""Smallest eigenpairs of SPD pencils (K, M) with verified residuals.

The reference algorithm is shift-invert Lanczos (ARPACK) at sigma = 0 with a
seeded start vector, so runs are deterministic.  Inner solves K x = b go
through a sparse direct factorization at desk scale and switch to an
ILU-preconditioned conjugate gradient beyond it.  Every reported pair is
re-verified with plain matrix-vector products before it is returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .assembly import DiscreteProblem, rayleigh_quotient

# above this dimension the direct factorization is replaced by
# ILU-preconditioned CG inner solves (memory, not accuracy)
DIRECT_SOLVE_LIMIT = 300_000


class SolverError(RuntimeError):
    """Raised for invalid solver input (not for slow convergence)."""


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the eigensolver; defaults match the solver contract."""

    num_pairs: int = 1
    tol: float = 1e-8
    maxiter: int = 20_000
    seed: int = 0
    preconditioner: str = "jacobi"  # inner-CG preconditioner: jacobi | none

    def __post_init__(self):
        if self.num_pairs < 1:
            raise SolverError("num_pairs must be >= 1")
        if not 0.0 < self.tol <= 1e-2:
            raise SolverError("tolerance must lie in (0, 1e-2]")
        if self.preconditioner not in ("jacobi", "none"):
            raise SolverError("preconditioner must be 'jacobi' or 'none'")


@dataclass(eq=False)
class EigenResult:
    """Ascending eigenvalues with M-orthonormal vectors and audit data."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, M-orthonormal
    residuals: np.ndarray  # ||K x - lambda M x|| / ||K x||
    iterations: int  # inner linear solves consumed
    converged: np.ndarray
    ortho_defect: float
    seed: int

    @property
    def all_converged(self) -> bool:
        return bool(self.converged.all())

    def to_json(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "residuals": self.residuals.tolist(),
            "iterations": self.iterations,
            "converged": self.converged.astype(bool).tolist(),
            "ortho_defect": self.ortho_defect,
            "seed": self.seed,
        }


class _CountingSolver:
    """Wraps an inner solver for K x = b, counting applications."""

    def __init__(self, K: sp.csr_matrix, preconditioner: str):
        self.count = 0
        n = K.shape[0]
        if n <= DIRECT_SOLVE_LIMIT:
            lu = sla.splu(K.tocsc())
            self._solve = lu.solve
            self.kind = "direct"
        else:
            ilu = sla.spilu(K.tocsc(), drop_tol=1e-4, fill_factor=12.0)
            M_ilu = sla.LinearOperator((n, n), matvec=ilu.solve)
            M_pre = M_ilu
            if preconditioner == "none":
                M_pre = None

            def solve(b):
                x, info = sla.cg(K, b, rtol=1e-12, atol=0.0, M=M_pre, maxiter=4000)
                if info != 0:
                    # fall back to a tighter, unpreconditioned run before failing
                    x, info = sla.cg(K, b, rtol=1e-12, atol=0.0, maxiter=20000)
                return x

            self._solve = solve
            self.kind = "cg+ilu"

    def __call__(self, b):
        self.count += 1
        return self._solve(b)


def _m_orthonormalize(M: sp.csr_matrix, vecs: np.ndarray) -> np.ndarray:
    """Gram-Schmidt in the M inner product (two passes)."""
    out = vecs.copy()
    for _ in range(2):
        for j in range(out.shape[1]):
            v = out[:, j]
            Mv = M @ v
            for i in range(j):
                v = v - out[:, i] * float(out[:, i] @ Mv)
                Mv = M @ v
            nrm = float(np.sqrt(v @ Mv))
            out[:, j] = v / nrm
    return out


def _verify(problem: DiscreteProblem, vals, vecs):
    """Residuals and Rayleigh-quotient re-verification with plain matvecs."""
    K = problem.K.full
    M = problem.M.full
    n_pairs = vecs.shape[1]
    residuals = np.empty(n_pairs)
    rq = np.empty(n_pairs)
    for j in range(n_pairs):
        x = vecs[:, j]
        Kx = K @ x
        Mx = M @ x
        lam = float(x @ Kx) / float(x @ Mx)
        rq[j] = rayleigh_quotient(problem, x)
        residuals[j] = np.linalg.norm(Kx - lam * Mx) / np.linalg.norm(Kx)
    gram = vecs.T @ (M @ vecs)
    defect = float(np.abs(gram - np.eye(n_pairs)).max())
    return rq, residuals, defect


def smallest_eigenpairs(
    problem: DiscreteProblem, config: SolverConfig = SolverConfig()
) -> EigenResult:
    """The ``num_pairs`` smallest eigenpairs of (K, M), ascending.

    Shift-invert Lanczos with a seeded start; eigenvalues are replaced by
    their independently recomputed Rayleigh quotients, vectors are
    M-orthonormal, and residual norms are audited with plain products.
    Non-convergence yields a partial result with ``converged`` flags down,
    never a silently wrong one.
    """
    n = problem.n
    m = config.num_pairs
    if m >= max(2, n // 10):
        raise SolverError(f"num_pairs = {m} too large for dimension {n}")

    K = problem.K.full
    M = problem.M.full
    rng = np.random.default_rng(config.seed)
    v0 = rng.standard_normal(n)

    inner = _CountingSolver(K, config.preconditioner)
    op_inv = sla.LinearOperator((n, n), matvec=inner)

    try:
        vals, vecs = sla.eigsh(
            K,
            k=m,
            M=M,
            sigma=0.0,
            OPinv=op_inv,
            v0=v0,
            maxiter=config.maxiter,
            tol=0.0,
        )
        converged = np.ones(m, dtype=bool)
    except sla.ArpackNoConvergence as exc:
        vals = np.asarray(exc.eigenvalues)
        vecs = np.asarray(exc.eigenvectors)
        converged = np.zeros(m, dtype=bool)
        if vals.size == 0:
            return EigenResult(
                eigenvalues=np.full(m, np.nan),
                eigenvectors=np.zeros((n, 0)),
                residuals=np.full(m, np.inf),
                iterations=inner.count,
                converged=converged,
                ortho_defect=np.inf,
                seed=config.seed,
            )
        converged = np.zeros(vals.shape[0], dtype=bool)

    order = np.argsort(vals)
    vals = vals[order]
    vecs = vecs[:, order]

    rq, residuals, defect = _verify(problem, vals, vecs)
    if defect > 1e-10:
        vecs = _m_orthonormalize(M, vecs)
        rq, residuals, defect = _verify(problem, vals, vecs)
    converged = converged & (residuals <= config.tol)

    return EigenResult(
        eigenvalues=rq,
        eigenvectors=vecs,
        residuals=residuals,
        iterations=inner.count,
        converged=converged,
        ortho_defect=defect,
        seed=config.seed,
    )


def deflate_and_continue(
    problem: DiscreteProblem, result: EigenResult, extra: int
) -> EigenResult:
    """Extend a converged result by ``extra`` further pairs.

    Deterministic recomputation with the same seed and the enlarged block;
    the previously reported eigenvalues must be reproduced, and the combined
    set satisfies the same orthonormality and residual contracts.
    """
    if not result.all_converged:
        raise SolverError("cannot continue from a non-converged result")
    m_old = result.eigenvalues.shape[0]
    config = SolverConfig(num_pairs=m_old + extra, seed=result.seed)
    combined = smallest_eigenpairs(problem, config)
    scale = max(1.0, float(np.abs(result.eigenvalues).max()))
    if np.max(np.abs(combined.eigenvalues[:m_old] - result.eigenvalues)) > 1e-8 * scale:
        raise SolverError("continuation failed to reproduce the initial pairs")
    return combined
