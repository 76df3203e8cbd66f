"""Exact differential geometry of graph surfaces ``x = (x1, x2, f(x1, x2))``.

Everything here is evaluated from the analytic gradient and Hessian of the
height function, vectorized over arbitrary leading point dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_CUTOFF = 0.025


class DegenerateChartError(ValueError):
    """Raised when the metric of a chart is not positive definite."""


def bump_eta(d, cutoff=DEFAULT_CUTOFF):
    """Cut-off compressed Gaussian ``exp(-1/(1 - d^2))`` and two derivatives.

    Values and derivatives are exactly zero for ``d >= 1 - cutoff``.

    Returns
    -------
    eta, deta, d2eta : ndarray
    """
    d = np.asarray(d, dtype=float)
    inside = d < 1.0 - cutoff
    s = np.where(inside, 1.0 - d * d, 1.0)
    eta = np.where(inside, np.exp(-1.0 / s), 0.0)
    deta = -2.0 * d * eta / s**2
    d2eta = eta * (-2.0 / s**2 + 4.0 * d * d / s**4 - 8.0 * d * d / s**3)
    return eta, deta, d2eta


def _eta_radial(d, cutoff):
    # eta, eta'(d)/d and (d/dd(eta'/d))/d; all regular at d = 0.
    inside = d < 1.0 - cutoff
    s = np.where(inside, 1.0 - d * d, 1.0)
    eta = np.where(inside, np.exp(-1.0 / s), 0.0)
    psi = -2.0 * eta / s**2
    dpsi_over_d = eta * (4.0 / s**4 - 8.0 / s**3)
    return eta, psi, dpsi_over_d


class GraphChart:
    """Base class for a single-chart graph surface.

    Subclasses implement :meth:`height` returning the height, its gradient and
    Hessian at parameter points of shape ``(..., 2)``.
    """

    box = (-2.0, 2.0, -2.0, 2.0)

    def height(self, xhat):
        raise NotImplementedError

    def embed(self, xhat):
        xhat = np.asarray(xhat, dtype=float)
        f = self.height(xhat)[0]
        return np.concatenate([xhat, f[..., None]], axis=-1)

    def contains(self, xhat, tol=1e-12):
        x0, x1, y0, y1 = self.box
        xhat = np.asarray(xhat, dtype=float)
        return ((xhat[..., 0] >= x0 - tol) & (xhat[..., 0] <= x1 + tol)
                & (xhat[..., 1] >= y0 - tol) & (xhat[..., 1] <= y1 + tol))


@dataclass(frozen=True)
class SurfaceChart(GraphChart):
    """Flat plane with a compressed-Gaussian bump of height ``amplitude * e^-1``.

    ``f(x) = amplitude * eta(|x - center| / radius)``.
    """

    amplitude: float = 1.0
    center: tuple = (-0.5, 0.0)
    radius: float = 0.25
    cutoff: float = DEFAULT_CUTOFF
    box: tuple = (-2.0, 2.0, -2.0, 2.0)

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("bump amplitude must be >= 0")
        if self.radius <= 0:
            raise ValueError("bump radius must be > 0")
        if not 0.0 < self.cutoff < 1.0:
            raise ValueError("cutoff threshold must lie in (0, 1)")
        x0, x1, y0, y1 = self.box
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate domain box {self.box}")

    def height(self, xhat):
        xhat = np.asarray(xhat, dtype=float)
        v = xhat - np.asarray(self.center, dtype=float)
        r = self.radius
        d = np.sqrt(np.sum(v * v, axis=-1)) / r
        eta, psi, dpsi = _eta_radial(d, self.cutoff)
        a = self.amplitude
        f = a * eta
        grad = (a * psi / r**2)[..., None] * v
        hess = (a * psi / r**2)[..., None, None] * np.eye(2) \
            + (a * dpsi / r**4)[..., None, None] * v[..., :, None] * v[..., None, :]
        return f, grad, hess


def surface_height(chart, xhat):
    """Height, gradient ``(..., 2)`` and Hessian ``(..., 2, 2)`` of the chart."""
    return chart.height(xhat)


def inv2(a):
    """Closed-form inverse of a stack of 2x2 matrices."""
    det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    out = np.empty_like(a)
    out[..., 0, 0] = a[..., 1, 1]
    out[..., 1, 1] = a[..., 0, 0]
    out[..., 0, 1] = -a[..., 0, 1]
    out[..., 1, 0] = -a[..., 1, 0]
    return out / det[..., None, None], det


@dataclass
class GeometryEval:
    """Pointwise geometry of a graph chart; arrays carry leading point axes.

    ``frame[..., i, :]`` is the orthogonalized tangent vector number ``i`` and
    ``coord_change[..., i, a]`` its ``a``-th parameter-plane component, so the
    derivative along frame vector ``i`` is ``coord_change @ grad_param``.
    ``christoffel[..., k, i, j]`` follows the orthogonal-coordinate formula and
    ``connection[..., j, l, k]`` is the exact frame connection
    ``frame_j . D_{frame_l} frame_k / h_j^2``.
    """

    xhat: np.ndarray
    point: np.ndarray
    jacobian: np.ndarray
    metric: np.ndarray
    inverse_metric: np.ndarray
    normal: np.ndarray
    weingarten: np.ndarray
    frame: np.ndarray
    frame_lengths: np.ndarray
    frame_length_derivs: np.ndarray
    coord_change: np.ndarray
    christoffel: np.ndarray
    connection: np.ndarray
    area_element: np.ndarray

    @property
    def projection(self):
        n = self.normal
        return np.eye(3) - n[..., :, None] * n[..., None, :]

    @property
    def gaussian_curvature(self):
        h = self.weingarten
        tr = np.trace(h, axis1=-2, axis2=-1)
        tr2 = np.einsum("...ij,...ji->...", h, h)
        return 0.5 * (tr * tr - tr2)


def eval_geometry(chart, xhat) -> GeometryEval:
    """Evaluate all exact geometric quantities at parameter points."""
    xhat = np.asarray(xhat, dtype=float)
    f, df, d2f = chart.height(xhat)
    shape = xhat.shape[:-1]
    f1, f2 = df[..., 0], df[..., 1]

    jac = np.zeros(shape + (3, 2))
    jac[..., 0, 0] = 1.0
    jac[..., 1, 1] = 1.0
    jac[..., 2, :] = df
    g = np.eye(2) + df[..., :, None] * df[..., None, :]
    ginv, detg = inv2(g)
    if np.any(detg <= 0.0):
        raise DegenerateChartError("metric determinant is not positive")

    m = np.stack([-f1, -f2, np.ones(shape)], axis=-1)
    mnorm = np.sqrt(detg)
    n = m / mnorm[..., None]
    # dm[..., alpha, j] = d m^alpha / d xhat^j
    dm = np.zeros(shape + (3, 2))
    dm[..., 0, :] = -d2f[..., 0, :]
    dm[..., 1, :] = -d2f[..., 1, :]
    dn = (dm - n[..., :, None] * np.einsum("...a,...aj->...j", n, dm)[..., None, :]) \
        / mnorm[..., None, None]
    weingarten = -np.einsum("...aj,...jk,...bk->...ab", dn, ginv, jac)

    # Gram-Schmidt: t2 against t1.
    t1 = jac[..., :, 0]
    t2 = jac[..., :, 1]
    g11, g12 = g[..., 0, 0], g[..., 0, 1]
    c = g12 / g11
    tt2 = t2 - c[..., None] * t1
    h1 = np.sqrt(g11)
    h2 = np.sqrt(detg / g11)

    # parameter derivatives d_a of t1, t2~, h1, h2
    dt1 = np.zeros(shape + (2, 3))
    dt1[..., :, 2] = d2f[..., 0, :]
    dt2 = np.zeros(shape + (2, 3))
    dt2[..., :, 2] = d2f[..., 1, :]
    dg11 = 2.0 * f1[..., None] * d2f[..., 0, :]
    dg12 = d2f[..., 0, :] * f2[..., None] + f1[..., None] * d2f[..., 1, :]
    dc = (dg12 * g11[..., None] - g12[..., None] * dg11) / g11[..., None] ** 2
    dtt2 = dt2 - dc[..., None] * t1[..., None, :] - c[..., None, None] * dt1
    dh1 = dg11 / (2.0 * h1[..., None])
    dh2 = np.einsum("...k,...ak->...a", tt2, dtt2) / h2[..., None]

    frame = np.stack([t1, tt2], axis=-2)
    hk = np.stack([h1, h2], axis=-1)
    w = frame[..., :, :2]
    # dh_ds[..., k, i] = derivative of h_k along frame vector i
    dh_dx = np.stack([dh1, dh2], axis=-2)
    dh_ds = np.einsum("...ia,...ka->...ki", w, dh_dx)

    gam = np.zeros(shape + (2, 2, 2))
    for k in range(2):
        i = 1 - k
        gam[..., k, k, k] = dh_ds[..., k, k] / hk[..., k]
        gam[..., k, i, k] = dh_ds[..., k, i] / hk[..., k]
        gam[..., k, k, i] = gam[..., k, i, k]
        gam[..., k, i, i] = -hk[..., i] / hk[..., k] ** 2 * dh_ds[..., i, k]

    # dframe[..., k, a, :] = d frame_k / d xhat^a
    dframe = np.stack([dt1, dtt2], axis=-3)
    # directional derivative D_{frame_l} frame_k
    dir_deriv = np.einsum("...la,...kax->...lkx", w, dframe)
    conn = np.einsum("...jx,...lkx->...jlk", frame, dir_deriv) \
        / (hk**2)[..., :, None, None]

    point = np.concatenate([xhat, f[..., None]], axis=-1)
    return GeometryEval(
        xhat=xhat,
        point=point,
        jacobian=jac,
        metric=g,
        inverse_metric=ginv,
        normal=n,
        weingarten=weingarten,
        frame=frame,
        frame_lengths=hk,
        frame_length_derivs=dh_ds,
        coord_change=w,
        christoffel=gam,
        connection=conn,
        area_element=h1 * h2,
    )


def christoffel_orth(chart, xhat):
    """Christoffel symbols ``[..., k, i, j]`` of the orthogonalized frame.

    Uses the orthogonal-coordinate formula built from frame lengths and their
    derivatives along the frame vectors.  The Gram-Schmidt frame is generally
    not a coordinate frame; :attr:`GeometryEval.connection` carries the exact
    frame connection including the bracket term, and the two agree wherever
    the frame commutes (e.g. on the symmetry axis of the bump).
    """
    return eval_geometry(chart, xhat).christoffel
