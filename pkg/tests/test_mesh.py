import math

import numpy as np
import pytest

from tanflow.geometry import SurfaceChart, eval_geometry
from tanflow.mesh import (
    Grading,
    MeshError,
    ParamMesh,
    check_conformity,
    lift,
    locate,
    triangulate,
)

BOX = (-2.0, 2.0, -2.0, 2.0)


def test_triangulate_counts():
    pm = triangulate(BOX, 0.5)
    n = 8
    assert pm.n_vertices == (n + 1) ** 2 + n**2
    assert pm.n_triangles == 4 * n**2
    assert check_conformity(pm)
    assert np.all(pm.signed_areas() > 0)
    assert pm.signed_areas().sum() == pytest.approx(16.0)


def test_triangulate_non_dividing_h():
    pm = triangulate(BOX, 0.3)
    check_conformity(pm)
    edges, _, _ = pm.edges()
    lengths = np.linalg.norm(pm.vertices[edges[:, 0]] - pm.vertices[edges[:, 1]], axis=1)
    assert lengths.max() <= 0.3 + 1e-12


def test_triangulate_errors():
    with pytest.raises(MeshError):
        triangulate(BOX, 5.0)
    with pytest.raises(MeshError):
        triangulate(BOX, -0.1)
    with pytest.raises(MeshError):
        triangulate((0, 0, 0, 1), 0.1)


def test_mesh_mirror_symmetry():
    pm = triangulate(BOX, 0.25)
    v = pm.vertices
    key = {tuple(np.round(p, 12)) for p in v}
    mirrored = {tuple(np.round(p * [1, -1], 12)) for p in v}
    assert key == mirrored


def test_boundary_edges_on_box():
    pm = triangulate(BOX, 0.5)
    be = pm.vertices[pm.boundary_edges]
    assert len(be) == 4 * 8
    assert np.all(np.isclose(np.abs(be), 2.0).any(axis=2).all(axis=1))


def test_conformity_detects_problems():
    pm = triangulate(BOX, 1.0)
    flipped = ParamMesh(pm.vertices, pm.triangles[:, [0, 2, 1]], 1.0, BOX)
    with pytest.raises(MeshError, match="orientation"):
        check_conformity(flipped)
    missing = ParamMesh(pm.vertices, pm.triangles[1:], 1.0, BOX)
    with pytest.raises(MeshError):
        check_conformity(missing)
    outside = ParamMesh(pm.vertices * 1.5, pm.triangles, 1.0, BOX)
    with pytest.raises(MeshError, match="outside"):
        check_conformity(outside)


def test_graded_mesh_conforming():
    g = Grading(center=(-0.5, 0.0), radius=0.3, levels=1)
    pm = triangulate(BOX, 0.25, g)
    check_conformity(pm)
    base = triangulate(BOX, 0.25)
    assert pm.n_triangles > base.n_triangles
    p = pm.vertices[pm.triangles]
    diam = np.max(np.linalg.norm(p - np.roll(p, 1, axis=1), axis=2), axis=1)
    inside = np.linalg.norm(p.mean(axis=1) - [-0.5, 0.0], axis=1) < 0.3
    far = np.linalg.norm(p.mean(axis=1) - [-0.5, 0.0], axis=1) > 1.5
    assert diam[inside].max() <= 0.5 * diam[far].max() + 1e-12


def test_grading_parse():
    g = Grading.parse("-0.5,0,0.3,2")
    assert g == Grading(center=(-0.5, 0.0), radius=0.3, levels=2)
    assert Grading.parse("0,0,1").levels == 1
    with pytest.raises(ValueError):
        Grading.parse("1,2")


@pytest.mark.parametrize("order", [1, 2])
def test_lift_points_on_surface(order):
    chart = SurfaceChart(amplitude=1.0)
    sm = lift(triangulate(BOX, 0.2), chart, order=order)
    np.testing.assert_allclose(sm.points, chart.embed(sm.nodes))
    assert sm.elements.shape[1] == (3 if order == 1 else 6)
    if order == 2:
        # midpoint nodes sit halfway between their corners in the parameter plane
        el = sm.elements
        for j, (a, b) in enumerate([(0, 1), (1, 2), (2, 0)]):
            np.testing.assert_allclose(sm.nodes[el[:, 3 + j]],
                                       0.5 * (sm.nodes[el[:, a]] + sm.nodes[el[:, b]]))
    np.testing.assert_allclose(sm.improved_normal, eval_geometry(chart, sm.nodes).normal)


def test_facet_normals_upward():
    sm = lift(triangulate(BOX, 0.1), SurfaceChart(amplitude=2.0))
    assert np.all(sm.facet_normal[:, 2] > 0)
    np.testing.assert_allclose(np.linalg.norm(sm.facet_normal, axis=1), 1)


def test_lifted_area_converges():
    chart = SurfaceChart(amplitude=1.0)
    areas = [lift(triangulate(BOX, h), chart).facet_areas().sum() for h in (0.1, 0.05, 0.025)]
    # surface area exceeds the flat box and increases toward its limit
    assert 16 < areas[0] < areas[1] < areas[2]
    e1, e2 = areas[2] - areas[1], areas[1] - areas[0]
    assert e1 < 0.5 * e2


def test_h_is_max_lifted_diameter():
    flat = lift(triangulate(BOX, 0.25), SurfaceChart(amplitude=0.0))
    assert flat.h == pytest.approx(0.25)
    bumpy = lift(triangulate(BOX, 0.25), SurfaceChart(amplitude=1.0))
    assert bumpy.h > flat.h


def test_discrete_weingarten_flat_zero():
    sm = lift(triangulate(BOX, 0.5), SurfaceChart(amplitude=0.0))
    assert np.abs(sm.weingarten).max() == 0.0


def test_discrete_weingarten_converges():
    chart = SurfaceChart(amplitude=1.0)
    errs = []
    for h in (0.04, 0.02):
        sm = lift(triangulate(BOX, h), chart)
        bc = sm.nodes[sm.corners].mean(axis=1)
        exact = eval_geometry(chart, bc).weingarten
        errs.append(np.sqrt(np.sum(sm.facet_areas()[:, None, None] * (sm.weingarten - exact) ** 2)))
    assert errs[1] < 0.7 * errs[0]


def test_locate_barycentric():
    pm = triangulate(BOX, 0.25)
    x1 = np.array([-0.25 * math.sqrt(2), 0.25 * math.sqrt(2)])
    t, lam = locate(pm, x1)
    assert lam.sum() == pytest.approx(1.0)
    assert np.all((lam >= 0) & (lam <= 1))
    np.testing.assert_allclose(lam @ pm.vertices[pm.triangles[t]], x1, atol=1e-14)


def test_locate_vertex_and_outside():
    pm = triangulate(BOX, 0.5)
    t, lam = locate(pm, pm.vertices[0])
    assert np.isclose(lam.max(), 1.0)
    with pytest.raises(MeshError):
        locate(pm, np.array([3.0, 0.0]))


def test_locate_random_points():
    pm = triangulate(BOX, 0.3)
    rng = np.random.default_rng(0)
    for x in rng.uniform(-2, 2, (50, 2)):
        t, lam = locate(pm, x)
        np.testing.assert_allclose(lam @ pm.vertices[pm.triangles[t]], x, atol=1e-13)
