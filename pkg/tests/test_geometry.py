import math

import numpy as np
import pytest

from tanflow.geometry import (
    GraphChart,
    SurfaceChart,
    bump_eta,
    christoffel_orth,
    eval_geometry,
    inv2,
    surface_height,
)


def fd4(func, x, e):
    return (8 * (func(x + e) - func(x - e)) - (func(x + 2 * e) - func(x - 2 * e))) \
        / (12 * np.linalg.norm(e))


def bump_points(chart, n, seed=0, step=2e-5):
    """Random points in the bump disc, kept off the cutoff circle."""
    rng = np.random.default_rng(seed)
    r = chart.radius * np.sqrt(rng.uniform(0, 1, n))
    th = rng.uniform(0, 2 * np.pi, n)
    x = np.asarray(chart.center) + np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    ring = chart.radius * (1 - chart.cutoff)
    return x[np.abs(np.linalg.norm(x - chart.center, axis=1) - ring) > 3 * step]


def test_eta_values():
    assert bump_eta(0.0)[0] == pytest.approx(math.exp(-1))
    assert bump_eta(1.0)[0] == 0.0
    assert bump_eta(0.5)[0] == pytest.approx(math.exp(-4 / 3))
    assert bump_eta(0.5)[0] == pytest.approx(0.263597, abs=1e-6)
    eta, d1, d2 = bump_eta(np.array([0.98, 1.5]))
    assert np.all(eta == 0) and np.all(d1 == 0) and np.all(d2 == 0)


def test_eta_derivatives_fd():
    d = np.linspace(0.0, 0.96, 50)
    s = 1e-5
    eta, d1, d2 = bump_eta(d)
    fd1 = (bump_eta(d + s)[0] - bump_eta(d - s)[0]) / (2 * s)
    fd2 = (bump_eta(d + s)[1] - bump_eta(d - s)[1]) / (2 * s)
    np.testing.assert_allclose(d1, fd1, atol=1e-7)
    np.testing.assert_allclose(d2, fd2, atol=1e-5)


def test_height_examples():
    c1 = SurfaceChart(amplitude=1.0)
    c2 = SurfaceChart(amplitude=2.0)
    p = np.array(c1.center)
    assert surface_height(c1, p)[0] == pytest.approx(math.exp(-1))
    assert surface_height(c2, p)[0] == pytest.approx(2 * math.exp(-1))
    far = p + np.array([[0.25, 0.0], [0.0, -0.3], [1.0, 1.0]])
    f, df, d2f = surface_height(c1, far)
    assert np.all(f == 0) and np.all(df == 0) and np.all(d2f == 0)
    # gradient and Hessian are regular at the center
    f, df, d2f = surface_height(c1, p)
    assert np.allclose(df, 0)
    np.testing.assert_allclose(d2f, -2 * math.exp(-1) / 0.25**2 * np.eye(2))


def test_height_vs_fd():
    chart = SurfaceChart(amplitude=1.5)
    x = bump_points(chart, 300)
    f, df, d2f = chart.height(x)
    for a in range(2):
        e = np.zeros(2)
        e[a] = 2e-5
        np.testing.assert_allclose(fd4(lambda y: chart.height(y)[0], x, e), df[:, a], atol=1e-7)
        np.testing.assert_allclose(fd4(lambda y: chart.height(y)[1], x, e), d2f[:, :, a],
                                   atol=1e-6)


def test_chart_validation():
    with pytest.raises(ValueError):
        SurfaceChart(amplitude=-1)
    with pytest.raises(ValueError):
        SurfaceChart(radius=0)
    with pytest.raises(ValueError):
        SurfaceChart(cutoff=1.0)
    with pytest.raises(ValueError):
        SurfaceChart(box=(1, 0, 0, 1))
    with pytest.raises(NotImplementedError):
        GraphChart().height(np.zeros(2))


def test_flat_chart():
    geo = eval_geometry(SurfaceChart(amplitude=0.0), np.random.default_rng(1).uniform(-2, 2, (50, 2)))
    assert np.allclose(geo.metric, np.eye(2))
    assert np.allclose(geo.weingarten, 0)
    assert np.allclose(geo.coord_change, np.eye(2))
    assert np.allclose(geo.normal, [0, 0, 1])
    assert np.allclose(geo.christoffel, 0) and np.allclose(geo.connection, 0)
    assert np.allclose(geo.area_element, 1)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_pointwise_invariants(alpha):
    chart = SurfaceChart(amplitude=alpha)
    geo = eval_geometry(chart, bump_points(chart, 500))
    jac, n, hmat, fr = geo.jacobian, geo.normal, geo.weingarten, geo.frame
    np.testing.assert_allclose(geo.metric, np.einsum("pai,paj->pij", jac, jac), atol=1e-12)
    np.testing.assert_allclose(np.einsum("pai,pa->pi", jac, n), 0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1, atol=1e-14)
    scale = 1 + np.abs(hmat).max()
    np.testing.assert_allclose(np.einsum("pab,pb->pa", hmat, n) / scale, 0, atol=1e-13)
    np.testing.assert_allclose((hmat - np.swapaxes(hmat, 1, 2)) / scale, 0, atol=1e-13)
    np.testing.assert_allclose(np.einsum("pa,pa->p", fr[:, 0], fr[:, 1]), 0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(fr, axis=2), geo.frame_lengths, rtol=1e-13)
    np.testing.assert_allclose(geo.area_element, np.sqrt(np.linalg.det(geo.metric)), rtol=1e-13)
    np.testing.assert_allclose(np.einsum("pij,pjk->pik", geo.metric, geo.inverse_metric),
                               np.broadcast_to(np.eye(2), geo.metric.shape), atol=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_geometry_fd_oracle(alpha):
    chart = SurfaceChart(amplitude=alpha)
    x = bump_points(chart, 400, seed=2)
    geo = eval_geometry(chart, x)
    for a in range(2):
        e = np.zeros(2)
        e[a] = 2e-5
        np.testing.assert_allclose(fd4(chart.embed, x, e), geo.jacobian[..., a], atol=1e-8)
        dn = fd4(lambda y: eval_geometry(chart, y).normal, x, e)
        ht = np.einsum("pab,pb->pa", geo.weingarten, geo.jacobian[..., a])
        np.testing.assert_allclose(-dn, ht, atol=1e-7)
        # derivatives of the frame lengths along the coordinate directions
        dh = fd4(lambda y: eval_geometry(chart, y).frame_lengths, x, e)
        w_inv = np.linalg.inv(geo.coord_change)
        dh_dx = np.einsum("pki,pai->pka", geo.frame_length_derivs, w_inv)
        np.testing.assert_allclose(dh, dh_dx[..., a], atol=1e-7)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_connection_fd_oracle(alpha):
    chart = SurfaceChart(amplitude=alpha)
    x = bump_points(chart, 300, seed=3)
    geo = eval_geometry(chart, x)
    dframe = np.stack([fd4(lambda y: eval_geometry(chart, y).frame, x, e)
                       for e in 2e-5 * np.eye(2)], axis=-1)     # p, k, x, a
    dir_deriv = np.einsum("pla,pkxa->plkx", geo.coord_change, dframe)
    conn = np.einsum("pjx,plkx->pjlk", geo.frame, dir_deriv) / (geo.frame_lengths**2)[:, :, None, None]
    np.testing.assert_allclose(conn, geo.connection, atol=1e-6)
    # metric compatibility: conn_jlk h_j^2 + conn_klj h_k^2 = d_l (t_j . t_k)
    h2 = geo.frame_lengths**2
    lhs = np.einsum("pjlk,pj->pjlk", geo.connection, h2) + \
        np.einsum("pklj,pk->pjlk", geo.connection, h2)
    dh2 = 2 * geo.frame_lengths[:, :, None] * geo.frame_length_derivs   # [k, l]
    diag = np.einsum("pjlj->pjl", lhs)
    np.testing.assert_allclose(diag, dh2, atol=1e-9 * (1 + np.abs(dh2).max()))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_christoffel_formula_fd(alpha):
    # orthogonal-coordinate formula rebuilt from finite-difference frame lengths
    chart = SurfaceChart(amplitude=alpha)
    x = bump_points(chart, 300, seed=4)
    geo = eval_geometry(chart, x)
    dh_dx = np.stack([fd4(lambda y: eval_geometry(chart, y).frame_lengths, x, e)
                      for e in 2e-5 * np.eye(2)], axis=-1)       # p, k, a
    dh = np.einsum("pia,pka->pki", geo.coord_change, dh_dx)
    hk = geo.frame_lengths
    gam = np.zeros_like(geo.christoffel)
    for k in range(2):
        i = 1 - k
        gam[:, k, k, k] = dh[:, k, k] / hk[:, k]
        gam[:, k, i, k] = gam[:, k, k, i] = dh[:, k, i] / hk[:, k]
        gam[:, k, i, i] = -hk[:, i] / hk[:, k] ** 2 * dh[:, i, k]
    np.testing.assert_allclose(gam, christoffel_orth(chart, x), atol=1e-6)


def test_connection_matches_christoffel_on_axis():
    # on the symmetry axis the Gram-Schmidt frame is a coordinate frame
    chart = SurfaceChart(amplitude=1.0)
    x = np.stack([np.linspace(-0.74, -0.26, 41), np.zeros(41)], axis=1)
    geo = eval_geometry(chart, x)
    conn_as_gamma = np.einsum("pjlk->pjkl", geo.connection)
    np.testing.assert_allclose(conn_as_gamma, geo.christoffel, atol=1e-10)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_gaussian_curvature_closed_form(alpha):
    chart = SurfaceChart(amplitude=alpha)
    x = bump_points(chart, 1000, seed=5)
    _, df, d2f = chart.height(x)
    k_exact = np.linalg.det(d2f) / (1 + np.sum(df**2, axis=1)) ** 2
    k = eval_geometry(chart, x).gaussian_curvature
    np.testing.assert_allclose(k, k_exact, rtol=1e-8, atol=1e-12)


def test_bump_has_both_curvature_signs():
    chart = SurfaceChart(amplitude=1.0)
    k = eval_geometry(chart, bump_points(chart, 2000)).gaussian_curvature
    assert k.max() > 1 and k.min() < -1


def test_inv2():
    a = np.random.default_rng(0).normal(size=(10, 2, 2)) + 3 * np.eye(2)
    inv, det = inv2(a)
    np.testing.assert_allclose(inv, np.linalg.inv(a), rtol=1e-12)
    np.testing.assert_allclose(det, np.linalg.det(a), rtol=1e-12)


def test_vectorized_shapes():
    geo = eval_geometry(SurfaceChart(), np.zeros((4, 5, 2)))
    assert geo.weingarten.shape == (4, 5, 3, 3)
    assert geo.connection.shape == (4, 5, 2, 2, 2)
    single = eval_geometry(SurfaceChart(), np.array([-0.5, 0.1]))
    assert single.frame.shape == (2, 3)


def test_embed_and_contains():
    chart = SurfaceChart()
    p = chart.embed(np.array([[-0.5, 0.0], [1.0, 1.0]]))
    np.testing.assert_allclose(p, [[-0.5, 0.0, math.exp(-1)], [1.0, 1.0, 0.0]])
    assert chart.contains(np.array([2.0, -2.0]))
    assert not chart.contains(np.array([2.1, 0.0]))
