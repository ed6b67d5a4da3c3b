import math

import numpy as np
import pytest

from polylayer.assembly import assemble_p1, assemble_q1
from polylayer.eigensolve import (
    SolverConfig,
    SolverError,
    deflate_and_continue,
    smallest_eigenpairs,
)
from polylayer.extrapolate import richardson
from polylayer.grid3d import box_grid
from polylayer.mesh2d import mesh_rectangle, refine

PI = math.pi


def _square_lambdas(h0, levels, k=1):
    mesh = mesh_rectangle(1.0, 1.0, h=h0)
    out = []
    for _ in range(levels):
        prob = assemble_p1(mesh)
        res = smallest_eigenpairs(prob, SolverConfig(num_pairs=k))
        assert res.all_converged
        out.append(res.eigenvalues)
        mesh = refine(mesh)
    return np.array(out)


def test_unit_square_first_eigenvalue():
    lams = _square_lambdas(0.25, 3)[:, 0]
    value, _, _ = richardson(lams)
    assert abs(value - 2 * PI**2) / (2 * PI**2) < 0.002


def test_nested_refinement_monotone_upper_bounds():
    lams = _square_lambdas(0.125, 3, k=3)
    # Rayleigh-Ritz on nested spaces: eigenvalues decrease with refinement
    assert (np.diff(lams, axis=0) <= 1e-10).all()


def test_square_first_three_eigenvalues_pattern():
    lams = _square_lambdas(0.125, 3, k=3)
    ext = [richardson(lams[:, j])[0] for j in range(3)]
    target = np.array([2.0, 5.0, 5.0]) * PI**2
    assert np.allclose(ext, target, rtol=0.01)


def test_mixed_strip_constant_longitudinal_mode():
    mesh = mesh_rectangle(
        3.0, 1.0, h=0.125, tags={"left": "neumann", "right": "neumann"}
    )
    lams = []
    for _ in range(3):
        prob = assemble_p1(mesh)
        res = smallest_eigenpairs(prob)
        lams.append(res.eigenvalues[0])
        mesh = refine(mesh)
    value, _, _ = richardson(lams)
    assert abs(value - PI**2) / PI**2 < 0.005


def test_unit_cube_q1():
    lams = []
    for h in (0.25, 0.125, 0.0625):
        prob = assemble_q1(box_grid((1.0, 1.0, 1.0), h=h))
        res = smallest_eigenpairs(prob)
        assert res.all_converged
        lams.append(res.eigenvalues[0])
    value, _, _ = richardson(lams)
    assert abs(value - 3 * PI**2) / (3 * PI**2) < 0.01


def test_residual_and_orthonormality_contracts():
    prob = assemble_p1(mesh_rectangle(1.0, 1.0, h=0.0625))
    res = smallest_eigenpairs(prob, SolverConfig(num_pairs=4))
    assert res.all_converged
    assert (res.residuals <= 1e-8).all()
    assert res.ortho_defect <= 1e-8
    assert (np.diff(res.eigenvalues) >= -1e-10).all()
    M = prob.M.full
    gram = res.eigenvectors.T @ (M @ res.eigenvectors)
    assert np.abs(gram - np.eye(4)).max() <= 1e-8


def test_determinism_same_seed():
    prob = assemble_p1(mesh_rectangle(1.0, 1.0, h=0.0625))
    r1 = smallest_eigenpairs(prob, SolverConfig(num_pairs=2, seed=11))
    r2 = smallest_eigenpairs(prob, SolverConfig(num_pairs=2, seed=11))
    assert np.array_equal(r1.eigenvalues, r2.eigenvalues)
    assert np.max(np.abs(r1.eigenvalues - r2.eigenvalues)) < 1e-12


def test_deflate_and_continue_extends_block():
    prob = assemble_p1(mesh_rectangle(1.0, 1.0, h=0.0625))
    first = smallest_eigenpairs(prob, SolverConfig(num_pairs=2, seed=3))
    combined = deflate_and_continue(prob, first, extra=2)
    assert combined.eigenvalues.shape == (4,)
    assert combined.ortho_defect <= 1e-8
    assert np.allclose(combined.eigenvalues[:2], first.eigenvalues, atol=1e-9)
    assert (np.diff(combined.eigenvalues) >= -1e-10).all()


def test_num_pairs_guard():
    prob = assemble_p1(mesh_rectangle(1.0, 1.0, h=0.5))
    with pytest.raises(SolverError):
        smallest_eigenpairs(prob, SolverConfig(num_pairs=2))


def test_solver_config_validation():
    with pytest.raises(SolverError):
        SolverConfig(tol=0.5)
    with pytest.raises(SolverError):
        SolverConfig(num_pairs=0)
    with pytest.raises(SolverError):
        SolverConfig(preconditioner="amg")


def test_iterative_inner_solver_matches_direct(monkeypatch):
    # force the ILU-preconditioned CG path and compare with the direct path
    import polylayer.eigensolve as es

    prob = assemble_p1(mesh_rectangle(1.0, 1.0, h=0.0625))
    direct = smallest_eigenpairs(prob, SolverConfig(num_pairs=2, seed=1))
    monkeypatch.setattr(es, "DIRECT_SOLVE_LIMIT", 10)
    iterative = smallest_eigenpairs(prob, SolverConfig(num_pairs=2, seed=1))
    assert iterative.all_converged
    assert (iterative.residuals <= 1e-8).all()
    assert np.allclose(iterative.eigenvalues, direct.eigenvalues, rtol=1e-10)


def test_iterative_path_without_preconditioner(monkeypatch):
    import polylayer.eigensolve as es

    prob = assemble_p1(mesh_rectangle(1.0, 1.0, h=0.125))
    monkeypatch.setattr(es, "DIRECT_SOLVE_LIMIT", 10)
    res = smallest_eigenpairs(prob, SolverConfig(preconditioner="none", seed=2))
    assert res.all_converged
    assert res.eigenvalues[0] == pytest.approx(2 * PI**2, rel=0.05)
