import math

import numpy as np
import pytest

from polylayer.geometry import lshape_profile
from polylayer.mesh2d import (
    MeshError,
    check_conforming,
    dump_mesh,
    evaluate,
    evaluate_batch,
    mesh_lshape,
    mesh_rectangle,
    refine,
    segment_quadrature,
)

PI = math.pi


@pytest.fixture(scope="module")
def mesh_right_angle():
    return mesh_lshape(lshape_profile(PI / 2, 4.0), h=0.25)


def test_lshape_area_exact(mesh_right_angle):
    assert mesh_right_angle.total_area == pytest.approx(9.0, abs=1e-10)
    assert (mesh_right_angle.signed_areas() > 0.0).all()


def test_lshape_conformity(mesh_right_angle):
    check_conforming(mesh_right_angle)


def test_neumann_boundary_length_is_two(mesh_right_angle):
    assert mesh_right_angle.boundary_length("neumann") == pytest.approx(2.0, abs=1e-12)


def test_dirichlet_covers_walls(mesh_right_angle):
    # dirichlet length = outer boundary (2*(cot + R)) + inner walls (2*R)
    cot = 1.0
    expected = 2.0 * (cot + 4.0) + 2.0 * 4.0
    assert mesh_right_angle.boundary_length("dirichlet") == pytest.approx(
        expected, abs=1e-10
    )


def test_h_too_large_rejected():
    with pytest.raises(MeshError):
        mesh_lshape(lshape_profile(PI / 2, 4.0), h=0.6)


@pytest.mark.parametrize("theta,R", [(0.4, 3.0), (2.6, 2.0)])
def test_meshes_across_angles(theta, R):
    mesh = mesh_lshape(lshape_profile(theta, R), h=0.2)
    check_conforming(mesh)
    assert mesh.total_area == pytest.approx(
        1.0 / math.tan(theta / 2) + 2 * R, rel=1e-12
    )
    assert mesh.min_angle() > 0.0


def test_refine_counts_area_nesting_tags(mesh_right_angle):
    fine = refine(mesh_right_angle)
    assert fine.num_triangles == 4 * mesh_right_angle.num_triangles
    assert fine.total_area == pytest.approx(mesh_right_angle.total_area, abs=1e-12)
    # parent nodes are a prefix of the child nodes
    assert np.array_equal(
        fine.nodes[: mesh_right_angle.num_nodes], mesh_right_angle.nodes
    )
    assert fine.parent is mesh_right_angle
    for tag in ("dirichlet", "neumann"):
        assert fine.boundary_length(tag) == pytest.approx(
            mesh_right_angle.boundary_length(tag), abs=1e-10
        )
    check_conforming(fine)


def test_nested_chain_depth_three(mesh_right_angle):
    m = mesh_right_angle
    for _ in range(3):
        m = refine(m)
    assert m.total_area == pytest.approx(9.0, abs=1e-10)
    assert m.boundary_length("neumann") == pytest.approx(2.0, abs=1e-10)
    assert np.array_equal(m.parent.nodes, m.nodes[: m.parent.num_nodes])


def test_evaluate_partition_of_unity(mesh_right_angle):
    ones = np.ones(mesh_right_angle.num_nodes)
    rng = np.random.default_rng(5)
    half = PI / 4
    d1 = np.array([math.cos(half), math.sin(half)])
    n1 = np.array([d1[1], -d1[0]])  # from ray 1 toward the strip interior
    for _ in range(20):
        s = rng.uniform(0.5, 4.0)
        u = rng.uniform(0.1, 0.9)
        p = s * d1 + u * n1
        assert evaluate(mesh_right_angle, ones, p) == pytest.approx(1.0, abs=1e-13)


def test_evaluate_reproduces_linears(mesh_right_angle):
    f = mesh_right_angle.nodes[:, 0].copy()
    rng = np.random.default_rng(6)
    hits = 0
    pts = rng.uniform([0.0, -3.5], [5.0, 3.5], size=(400, 2))
    vals, inside = evaluate_batch(mesh_right_angle, f, pts)
    assert inside.sum() > 100
    assert np.allclose(vals[inside], pts[inside, 0], atol=1e-12)
    # evaluation at a node returns the nodal value
    nid = 17
    assert evaluate(mesh_right_angle, f, mesh_right_angle.nodes[nid]) == pytest.approx(
        f[nid], abs=1e-12
    )


def test_evaluate_outside_raises(mesh_right_angle):
    with pytest.raises(MeshError):
        evaluate(mesh_right_angle, np.ones(mesh_right_angle.num_nodes), (-1.0, -1.0))


def test_evaluate_continuous_across_edges(mesh_right_angle):
    mesh = mesh_right_angle
    rng = np.random.default_rng(8)
    values = rng.normal(size=mesh.num_nodes)
    # interior edges: shared by two triangles; interpolate from both sides
    from collections import defaultdict

    owners = defaultdict(list)
    for t, tri in enumerate(mesh.triangles):
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            owners[(min(a, b), max(a, b))].append(t)
    interior = [e for e, ts in owners.items() if len(ts) == 2]
    sel = rng.choice(len(interior), size=min(1000, len(interior)), replace=False)

    def interp_in(t, p):
        tri = mesh.triangles[t]
        a, b, c = mesh.nodes[tri]
        T = np.array([b - a, c - a]).T
        l12 = np.linalg.solve(T, p - a)
        lam = np.array([1 - l12.sum(), *l12])
        return float(lam @ values[tri])

    for k in sel:
        (a, b), (t1, t2) = interior[k], owners[interior[k]]
        s = rng.uniform(0.05, 0.95)
        p = (1 - s) * mesh.nodes[a] + s * mesh.nodes[b]
        assert abs(interp_in(t1, p) - interp_in(t2, p)) < 1e-12


def test_segment_quadrature_constant(mesh_right_angle):
    ones = np.ones(mesh_right_angle.num_nodes)
    # a segment of length 2 along outlet 1 axis, inside the strip
    half = PI / 4
    d1 = np.array([math.cos(half), math.sin(half)])
    p0 = np.array([2 ** 0.5, 0.0]) + 0.5 * d1 + 0.2 * np.array([-d1[1], d1[0]])
    val = segment_quadrature(mesh_right_angle, ones, p0, p0 + 2.0 * d1)
    assert val == pytest.approx(2.0, abs=1e-10)


def test_segment_quadrature_polynomial():
    mesh = mesh_rectangle(1.0, 1.0, h=0.25)
    f = mesh.nodes[:, 0].copy()
    val = segment_quadrature(mesh, f, (0.0, 0.5), (1.0, 0.5))
    assert val == pytest.approx(1.0 / 3.0, abs=1e-8)


def test_segment_quadrature_exponential_weight():
    mesh = mesh_rectangle(2.0, 1.0, h=0.2)
    ones = np.ones(mesh.num_nodes)
    c = 0.7
    val = segment_quadrature(
        mesh, ones, (0.0, 0.4), (2.0, 0.4), weight=lambda t: np.exp(-2 * c * t)
    )
    exact = (1.0 - math.exp(-4 * c)) / (2 * c)
    assert val == pytest.approx(exact, abs=1e-8)


def test_segment_quadrature_exits_domain(mesh_right_angle):
    ones = np.ones(mesh_right_angle.num_nodes)
    with pytest.raises(MeshError):
        segment_quadrature(mesh_right_angle, ones, (-0.5, 0.0), (1.0, 0.0))


def test_segment_along_mesh_edges():
    # the kite diagonal lies on triangle edges; quadrature must still work
    profile = lshape_profile(PI / 2, 2.0)
    mesh = mesh_lshape(profile, h=0.25)
    ones = np.ones(mesh.num_nodes)
    p0 = np.zeros(2)
    p1 = profile.inner_vertex
    val = segment_quadrature(mesh, ones, p0, p1)
    assert val == pytest.approx(profile.corner_distance, abs=1e-10)


def test_min_angle_reported_for_sharp_theta():
    mesh = mesh_lshape(lshape_profile(0.18, 2.0), h=0.2)
    check_conforming(mesh)
    assert mesh.total_area == pytest.approx(1 / math.tan(0.09) + 4.0, rel=1e-12)
    # theta-dependent bound, reported at build time: no silent slivers
    assert mesh.quality_min_angle is not None
    assert mesh.quality_min_angle > 0.01
    assert refine(mesh).quality_min_angle == mesh.quality_min_angle


def test_rectangle_mesh_tags_and_area():
    mesh = mesh_rectangle(3.0, 1.0, h=0.25, tags={"left": "neumann", "right": "neumann"})
    check_conforming(mesh)
    assert mesh.total_area == pytest.approx(3.0, abs=1e-12)
    assert mesh.boundary_length("neumann") == pytest.approx(2.0, abs=1e-12)
    assert mesh.boundary_length("dirichlet") == pytest.approx(6.0, abs=1e-12)


def test_dump_mesh(tmp_path, mesh_right_angle):
    path = tmp_path / "mesh.txt"
    dump_mesh(mesh_right_angle, path)
    text = path.read_text().splitlines()
    assert text[1].startswith("# theta")
    assert text[2] == f"nodes {mesh_right_angle.num_nodes}"
