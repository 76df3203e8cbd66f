"""Criss-cross triangulations of the parameter box and their lift to the surface."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import eval_geometry


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Grading:
    """Local refinement: ``levels`` halvings of h inside a disc."""

    center: tuple
    radius: float
    levels: int = 1

    @classmethod
    def parse(cls, text):
        """Parse ``"cx,cy,radius,levels"`` (levels optional)."""
        parts = [float(p) for p in str(text).replace(" ", "").split(",") if p]
        if len(parts) not in (3, 4):
            raise ValueError(f"grading needs center_x,center_y,radius[,levels], got {text!r}")
        levels = int(parts[3]) if len(parts) == 4 else 1
        return cls(center=(parts[0], parts[1]), radius=parts[2], levels=levels)


@dataclass
class ParamMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    h_target: float
    box: tuple = (-2.0, 2.0, -2.0, 2.0)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def edges(self):
        """Unique edges (sorted pairs) and the triangle-to-edge map.

        Edge ``j`` of a triangle is opposite its vertex ``j``.
        """
        t = self.triangles
        e = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1)
        e = np.sort(e.reshape(-1, 2), axis=1)
        uniq, inv, counts = np.unique(e, axis=0, return_inverse=True, return_counts=True)
        return uniq, inv.reshape(-1, 3), counts

    @property
    def boundary_edges(self):
        uniq, _, counts = self.edges()
        return uniq[counts == 1]

    def signed_areas(self):
        p = self.vertices[self.triangles]
        a = p[:, 1] - p[:, 0]
        b = p[:, 2] - p[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])


def check_conformity(pm: ParamMesh, tol=1e-12):
    """Raise :class:`MeshError` unless the mesh is a conforming triangulation."""
    if np.any(pm.signed_areas() <= 0):
        raise MeshError("triangle with non-positive orientation")
    x0, x1, y0, y1 = pm.box
    v = pm.vertices
    if np.any((v[:, 0] < x0 - tol) | (v[:, 0] > x1 + tol)
              | (v[:, 1] < y0 - tol) | (v[:, 1] > y1 + tol)):
        raise MeshError("vertex outside the domain box")
    uniq, _, counts = pm.edges()
    if np.any(counts > 2):
        raise MeshError("edge shared by more than two triangles")
    # any edge used once must lie on the box boundary, otherwise a hanging node
    be = v[uniq[counts == 1]]
    on_x = np.all(np.abs(be[:, :, 0] - x0) < tol, axis=1) | np.all(np.abs(be[:, :, 0] - x1) < tol, axis=1)
    on_y = np.all(np.abs(be[:, :, 1] - y0) < tol, axis=1) | np.all(np.abs(be[:, :, 1] - y1) < tol, axis=1)
    if not np.all(on_x | on_y):
        raise MeshError("interior edge without a neighbour (hanging node)")
    total = pm.signed_areas().sum()
    if abs(total - (x1 - x0) * (y1 - y0)) > 1e-9 * (x1 - x0) * (y1 - y0):
        raise MeshError("triangles do not tile the box")
    return True


def triangulate(box, h, grading: Grading | None = None) -> ParamMesh:
    """Criss-cross mesh: every grid cell is split into 4 triangles by its center.

    Cells have side at most ``h``.  Each triangle is stored as
    ``(center, a, b)`` counterclockwise, ``a-b`` being the cell side; that side
    is also the bisection edge used by the optional local refinement.
    """
    x0, x1, y0, y1 = (float(b) for b in box)
    lx, ly = x1 - x0, y1 - y0
    if lx <= 0 or ly <= 0:
        raise MeshError(f"degenerate box {box}")
    if h <= 0:
        raise MeshError("mesh size must be positive")
    if h > min(lx, ly):
        raise MeshError(f"mesh size {h} larger than the box")
    nx = math.ceil(lx / h - 1e-12)
    ny = math.ceil(ly / h - 1e-12)
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    corners = np.stack([gx.ravel(), gy.ravel()], axis=1)
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    mx, my = np.meshgrid(cx, cy, indexing="ij")
    centers = np.stack([mx.ravel(), my.ravel()], axis=1)
    vertices = np.concatenate([corners, centers])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    i, j = i.ravel(), j.ravel()
    c00 = i * (ny + 1) + j
    c10 = (i + 1) * (ny + 1) + j
    c11 = (i + 1) * (ny + 1) + j + 1
    c01 = i * (ny + 1) + j + 1
    ctr = len(corners) + i * ny + j
    tris = np.stack([
        np.stack([ctr, c00, c10], axis=1),
        np.stack([ctr, c10, c11], axis=1),
        np.stack([ctr, c11, c01], axis=1),
        np.stack([ctr, c01, c00], axis=1),
    ], axis=1).reshape(-1, 3)
    pm = ParamMesh(vertices=vertices, triangles=tris.astype(np.int64), h_target=float(h),
                   box=(x0, x1, y0, y1))
    if grading is not None:
        pm = refine_disc(pm, grading)
    return pm


def _bisect_marked(vertices, tris, marked_tri):
    """One round of newest-vertex bisection with conforming closure.

    The refinement edge of ``(v0, v1, v2)`` is ``v1-v2``.
    """
    def key(a, b):
        return (a, b) if a < b else (b, a)

    marked = set()
    for t in np.flatnonzero(marked_tri):
        marked.add(key(tris[t, 1], tris[t, 2]))
    edge_tris = {}
    for t, (a, b, c) in enumerate(tris):
        for e in (key(b, c), key(c, a), key(a, b)):
            edge_tris.setdefault(e, []).append(t)
    stack = list(marked)
    while stack:
        e = stack.pop()
        for t in edge_tris[e]:
            r = key(tris[t, 1], tris[t, 2])
            if r not in marked:
                marked.add(r)
                stack.append(r)

    verts = [tuple(v) for v in vertices]
    midpoint = {}
    for e in sorted(marked):
        midpoint[e] = len(verts)
        a, b = e
        verts.append(tuple(0.5 * (np.asarray(verts[a]) + np.asarray(verts[b]))))

    out = []

    def split(t):
        v0, v1, v2 = t
        e = key(v1, v2)
        if e not in midpoint:
            out.append(t)
            return
        m = midpoint[e]
        split((m, v0, v1))
        split((m, v2, v0))

    for t in tris:
        split(tuple(int(x) for x in t))
    return np.array(verts), np.array(out, dtype=np.int64)


def refine_disc(pm: ParamMesh, grading: Grading) -> ParamMesh:
    """Halve the mesh size ``grading.levels`` times inside a disc."""
    verts, tris = pm.vertices, pm.triangles
    c = np.asarray(grading.center, dtype=float)
    for _ in range(2 * grading.levels):
        p = verts[tris]
        # triangle meets the disc if its closest vertex or barycenter is inside
        dist = np.min(np.linalg.norm(p - c, axis=2), axis=1)
        dist = np.minimum(dist, np.linalg.norm(p.mean(axis=1) - c, axis=1))
        diam = np.max(np.linalg.norm(p - np.roll(p, 1, axis=1), axis=2), axis=1)
        verts, tris = _bisect_marked(verts, tris, dist < grading.radius + diam)
    return ParamMesh(vertices=verts, triangles=tris, h_target=pm.h_target, box=pm.box)


@dataclass
class SurfaceMesh:
    """Triangulation lifted onto a chart, with discrete geometric fields.

    ``nodes`` holds the parameter coordinates of all Lagrange nodes (vertices
    first, then edge midpoints for ``order == 2``); ``elements`` lists the
    node indices per triangle, three corners then midpoints of edges
    (0,1), (1,2), (2,0).
    """

    param_mesh: ParamMesh
    chart: object
    order: int
    exact_geometry: bool
    nodes: np.ndarray
    elements: np.ndarray
    points: np.ndarray
    facet_normal: np.ndarray
    improved_normal: np.ndarray
    node_m: np.ndarray
    weingarten: np.ndarray = field(repr=False, default=None)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def corners(self):
        return self.elements[:, :3]

    def facet_areas(self):
        p = self.points[self.corners]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    def facet_diameters(self):
        p = self.points[self.corners]
        return np.max(np.linalg.norm(p - np.roll(p, 1, axis=1), axis=2), axis=1)

    @property
    def h(self):
        """Maximal facet diameter of the lifted triangulation."""
        return float(self.facet_diameters().max())


def _p2_nodes(pm: ParamMesh):
    uniq, tri_edges, _ = pm.edges()
    mids = 0.5 * (pm.vertices[uniq[:, 0]] + pm.vertices[uniq[:, 1]])
    nv = pm.n_vertices
    # local midpoint order (0,1), (1,2), (2,0) = edges opposite vertex 2, 0, 1
    el = np.concatenate([pm.triangles, nv + tri_edges[:, [2, 0, 1]]], axis=1)
    return np.concatenate([pm.vertices, mids]), el


def lift(pm: ParamMesh, chart, order=1, exact_geometry=False) -> SurfaceMesh:
    """Lift a parameter mesh through the chart."""
    if order not in (1, 2):
        raise ValueError("polynomial order must be 1 or 2")
    if not np.all(chart.contains(pm.vertices)):
        raise MeshError("mesh vertex outside the chart domain")
    if order == 1:
        nodes, elements = pm.vertices.copy(), pm.triangles.copy()
    else:
        nodes, elements = _p2_nodes(pm)
    geo = eval_geometry(chart, nodes)
    points = geo.point
    p = points[elements[:, :3]]
    cr = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    nrm = np.linalg.norm(cr, axis=1)
    if np.any(nrm <= 0):
        raise MeshError("degenerate facet with zero area")
    sm = SurfaceMesh(
        param_mesh=pm,
        chart=chart,
        order=order,
        exact_geometry=bool(exact_geometry),
        nodes=nodes,
        elements=elements,
        points=points,
        facet_normal=cr / nrm[:, None],
        improved_normal=geo.normal,
        node_m=geo.normal * geo.area_element[:, None],
    )
    sm.weingarten = discrete_weingarten(sm)
    return sm


def _p1_surface_gradients(points):
    """Surface gradients of the three hat functions on flat facets, ``(T, 3, 3)``."""
    e1 = points[:, 1] - points[:, 0]
    e2 = points[:, 2] - points[:, 0]
    jac = np.stack([e1, e2], axis=-1)
    g = np.einsum("tai,taj->tij", jac, jac)
    ginv = np.linalg.inv(g)
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return np.einsum("tai,tij,bj->tba", jac, ginv, ref)


def discrete_weingarten(sm: SurfaceMesh) -> np.ndarray:
    """Per-facet ``H_h = -|m_h|^{-1} P_h grad(I_h m)`` at the facet barycenter.

    ``m`` is the exact unnormalized normal ``t1 x t2`` at the vertices,
    interpolated linearly over each flat facet.
    """
    corners = sm.corners
    grads = _p1_surface_gradients(sm.points[corners])
    mv = sm.node_m[corners]
    grad_m = np.einsum("tva,tvb->tab", mv, grads)
    m_bar = mv.mean(axis=1)
    mnorm = np.linalg.norm(m_bar, axis=1)
    if np.any(mnorm <= 0):
        raise MeshError("vanishing interpolated normal field")
    n = sm.facet_normal
    proj = np.eye(3) - n[:, :, None] * n[:, None, :]
    return -np.einsum("tab,tbc->tac", proj, grad_m) / mnorm[:, None, None]


def locate(sm_or_pm, xhat, tol=1e-12):
    """Containing triangle and barycentric weights of a parameter point.

    On shared edges and vertices the lowest-indexed triangle wins.
    """
    pm = sm_or_pm.param_mesh if isinstance(sm_or_pm, SurfaceMesh) else sm_or_pm
    xhat = np.asarray(xhat, dtype=float)
    p = pm.vertices[pm.triangles]
    a = p[:, 1] - p[:, 0]
    b = p[:, 2] - p[:, 0]
    det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    r = xhat - p[:, 0]
    l1 = (r[:, 0] * b[:, 1] - r[:, 1] * b[:, 0]) / det
    l2 = (a[:, 0] * r[:, 1] - a[:, 1] * r[:, 0]) / det
    l0 = 1.0 - l1 - l2
    inside = (l0 >= -tol) & (l1 >= -tol) & (l2 >= -tol)
    hits = np.flatnonzero(inside)
    if len(hits) == 0:
        raise MeshError(f"point {xhat.tolist()} lies outside the mesh")
    t = int(hits[0])
    lam = np.clip(np.array([l0[t], l1[t], l2[t]]), 0.0, 1.0)
    return t, lam / lam.sum()
