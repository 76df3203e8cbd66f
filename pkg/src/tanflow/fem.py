"""Lagrange spaces on lifted meshes, quadrature, and the shared element kernels.

Tensor-valued fields are stored node-major: global dof ``node * N + comp``
with ``N = 3**rank`` embedding components, rank-2 components flattened
row-major (``comp = 3 * a + b``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import eval_geometry, inv2
from .linalg import Assembler
from .mesh import SurfaceMesh

# ----------------------------------------------------------------- quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points and weights normalized to sum to one."""

    points: np.ndarray
    weights: np.ndarray
    degree: int


def _orbit3(a, w):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)], [w] * 3


def gauss_rule(degree=3) -> QuadratureRule:
    """Symmetric Gauss rules on the triangle with positive weights.

    ``degree=3`` is the 6-point rule exact on cubics, ``degree=5`` the
    7-point rule exact on quintics.
    """
    if degree <= 3:
        a, b = 0.659027622374092, 0.231933368553031
        c = 1.0 - a - b
        pts = [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
        return QuadratureRule(np.array(pts), np.full(6, 1.0 / 6.0), 3)
    if degree <= 5:
        s = np.sqrt(15.0)
        p1, w1 = _orbit3((6.0 - s) / 21.0, (155.0 - s) / 1200.0)
        p2, w2 = _orbit3((6.0 + s) / 21.0, (155.0 + s) / 1200.0)
        pts = [(1 / 3, 1 / 3, 1 / 3)] + p1 + p2
        return QuadratureRule(np.array(pts), np.array([9.0 / 40.0] + w1 + w2), 5)
    raise ValueError(f"no rule of degree {degree}")


def default_rule(order):
    return gauss_rule(3 if order == 1 else 5)


# ---------------------------------------------------------------- basis


_DLAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
_P2_EDGES = ((0, 1), (1, 2), (2, 0))


def eval_basis(k, bary):
    """Lagrange basis values ``(..., nb)`` and reference gradients ``(..., nb, 2)``.

    Reference coordinates are ``(xi, eta) = (bary[1], bary[2])``.
    """
    lam = np.asarray(bary, dtype=float)
    if k == 1:
        vals = lam.copy()
        grads = np.broadcast_to(_DLAMBDA, lam.shape + (2,)).copy()
        return vals, grads
    if k == 2:
        vals = [lam[..., v] * (2.0 * lam[..., v] - 1.0) for v in range(3)]
        grads = [(4.0 * lam[..., v] - 1.0)[..., None] * _DLAMBDA[v] for v in range(3)]
        for i, j in _P2_EDGES:
            vals.append(4.0 * lam[..., i] * lam[..., j])
            grads.append(4.0 * (lam[..., i][..., None] * _DLAMBDA[j]
                                + lam[..., j][..., None] * _DLAMBDA[i]))
        return np.stack(vals, axis=-1), np.stack(grads, axis=-2)
    raise ValueError("polynomial order must be 1 or 2")


def lagrange_nodes(k):
    """Barycentric coordinates of the local Lagrange nodes."""
    v = np.eye(3)
    if k == 1:
        return v
    return np.concatenate([v, np.array([0.5 * (v[i] + v[j]) for i, j in _P2_EDGES])])


# ---------------------------------------------------------------- spaces


@dataclass
class FESpace:
    mesh: SurfaceMesh
    components: int = 1

    @property
    def order(self):
        return self.mesh.order

    @property
    def n_dof(self):
        return self.mesh.n_nodes * self.components

    @property
    def local_size(self):
        return self.mesh.elements.shape[1] * self.components

    def element_dofs(self, elems=slice(None)):
        nodes = self.mesh.elements[elems]
        n = self.components
        return (nodes[:, :, None] * n + np.arange(n)).reshape(len(nodes), -1)


@dataclass
class CoefficientVector:
    values: np.ndarray
    rank: int
    layout: str = "embedding"

    def __post_init__(self):
        if self.layout not in ("embedding", "intrinsic"):
            raise ValueError(f"unknown layout {self.layout!r}")

    @property
    def components(self):
        return (3 if self.layout == "embedding" else 2) ** self.rank

    def nodal(self):
        return self.values.reshape(-1, self.components)


# ------------------------------------------------------- quadrature geometry


@dataclass
class QuadData:
    """Geometry and basis data at the quadrature points of a chunk of elements."""

    weights: np.ndarray       # (E, Q) quadrature weight times area element
    phi: np.ndarray           # (Q, nb)
    grad: np.ndarray          # (E, Q, nb, 3) surface gradients of the basis
    normal: np.ndarray        # (E, Q, 3)
    weingarten: np.ndarray    # (E, Q, 3, 3)
    sharp_normal: np.ndarray  # (E, Q, 3)
    xhat: np.ndarray          # (E, Q, 2)
    diameters: np.ndarray     # (E,) lifted facet diameters


def param_affine(sm: SurfaceMesh, elems):
    """Origins ``(E, 2)`` and Jacobians ``(E, 2, 2)`` of the parameter triangles."""
    v = sm.nodes[sm.elements[elems, :3]]
    a = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
    return v[:, 0], a


def _normalize(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def quadrature_data(sm: SurfaceMesh, elems, rule: QuadratureRule) -> QuadData:
    """Evaluate geometry at quadrature points.

    With ``sm.exact_geometry`` the basis lives on the exact surface and all
    geometric fields come from the chart; otherwise the surface is the
    Lagrange interpolant of the chart and ``n_h``, ``H_h`` and the improved
    normal are the discrete constructions.
    """
    phi, dphi = eval_basis(sm.order, rule.points)
    origin, a = param_affine(sm, elems)
    xhat = origin[:, None, :] + np.einsum("eij,qj->eqi", a, rule.points[:, 1:])
    if sm.exact_geometry:
        geo = eval_geometry(sm.chart, xhat)
        jac = np.einsum("eqai,eij->eqaj", geo.jacobian, a)
        normal = geo.normal
        weingarten = geo.weingarten
        sharp = geo.normal
    else:
        x = sm.points[sm.elements[elems]]
        jac = np.einsum("eva,qvj->eqaj", x, dphi)
        normal = None
    g = np.einsum("eqai,eqaj->eqij", jac, jac)
    ginv, det = inv2(g)
    grad = np.einsum("eqai,eqij,qbj->eqba", jac, ginv, dphi)
    weights = rule.weights * 0.5 * np.sqrt(det)
    if not sm.exact_geometry:
        nodes = sm.elements[elems]
        if sm.order == 1:
            normal = np.broadcast_to(sm.facet_normal[elems][:, None, :], xhat.shape[:2] + (3,))
        else:
            normal = _normalize(np.cross(jac[..., 0], jac[..., 1]))
        m_nodes = sm.node_m[nodes]
        m_q = np.einsum("qv,eva->eqa", phi, m_nodes)
        grad_m = np.einsum("eva,eqvb->eqab", m_nodes, grad)
        proj = np.eye(3) - normal[..., :, None] * normal[..., None, :]
        weingarten = -np.einsum("eqab,eqbc->eqac", proj, grad_m) \
            / np.linalg.norm(m_q, axis=-1)[..., None, None]
        sharp = _normalize(np.einsum("qv,eva->eqa", phi, sm.improved_normal[nodes]))
    corners = sm.points[sm.elements[elems, :3]]
    diam = np.max(np.linalg.norm(corners - np.roll(corners, 1, axis=1), axis=2), axis=1)
    return QuadData(weights=weights, phi=phi, grad=grad, normal=np.asarray(normal),
                    weingarten=weingarten, sharp_normal=sharp, xhat=xhat, diameters=diam)


def _chunks(n_elem, per_element_floats, budget=2.5e7):
    size = max(256, int(budget // max(per_element_floats, 1)))
    for start in range(0, n_elem, size):
        yield slice(start, min(start + size, n_elem))


# ---------------------------------------------------------- tensor algebra


def projector(normal):
    return np.eye(3) - normal[..., :, None] * normal[..., None, :]


def tensor_projector(proj, rank):
    """Matrix ``(..., N, N)`` of the index-wise projection on flattened n-tensors."""
    if rank == 0:
        return np.ones(proj.shape[:-2] + (1, 1))
    if rank == 1:
        return proj
    if rank == 2:
        out = proj[..., :, None, :, None] * proj[..., None, :, None, :]
        return out.reshape(proj.shape[:-2] + (9, 9))
    raise ValueError(f"unsupported tensor rank {rank}")


def correction_tensors(normal, weingarten, proj, rank):
    """``G`` applied to the unit tensors: array ``(..., N, N, 3)``.

    ``G(u)`` is the term with ``grad_S(P u) = P grad(u) P + G(u)`` for an
    embedded field ``u``:
    rank 1: ``G(u)^{ag} = H^{ag} (u . n)``,
    rank 2: ``G(u)^{abg} = H^{ag} P^{b}_{d} u^{cd} n_c + H^{bg} P^{a}_{c} u^{cd} n_d``.
    The first axis enumerates the unit tensor, the second the tensor index of
    ``G``, the last the derivative index.
    """
    if rank == 1:
        return normal[..., :, None, None] * weingarten[..., None, :, :]
    if rank == 2:
        n, h, p = normal, weingarten, proj
        t1 = np.einsum("...c,...ag,...bd->...cdabg", n, h, p)
        t2 = np.einsum("...d,...bg,...ac->...cdabg", n, h, p)
        return (t1 + t2).reshape(normal.shape[:-1] + (9, 9, 3))
    raise ValueError(f"unsupported tensor rank {rank}")


def covariant_gradient_basis(qd: QuadData, rank, with_correction=True):
    """Projected gradients ``(E, Q, nb, N, N, 3)`` of the vector basis ``phi_a E_c``.

    Entry ``[e, q, a, c, I, g]`` is component ``(I, g)`` of
    ``grad_S(phi_a E_c) + G(phi_a E_c)``.
    """
    ptens = tensor_projector(projector(qd.normal), rank)
    # (P E_c)_I grad_g  ->  ptens[I, c]
    d = np.einsum("eqic,eqag->eqacig", ptens, qd.grad)
    if with_correction:
        corr = correction_tensors(qd.normal, qd.weingarten, projector(qd.normal), rank)
        d = d + qd.phi[None, :, :, None, None, None] * corr[:, :, None]
    return d


# ------------------------------------------------------------- assembly


def _finish(assembler):
    return assembler.tocsr()


def assemble_mass(space: FESpace, weight=None, rule=None):
    """``M_ij = sum_q w_q W(x_q) phi_i phi_j`` with a pointwise weight.

    ``weight`` is ``None`` (identity on components), a scalar, or a callable
    receiving :class:`QuadData` and returning ``(E, Q)`` or ``(E, Q, N, N)``.
    """
    sm = space.mesh
    rule = rule or default_rule(sm.order)
    n = space.components
    nb = sm.elements.shape[1]
    asm = Assembler(space.n_dof)
    for chunk in _chunks(sm.n_elements, len(rule.weights) * (n * n + nb * 12)):
        qd = quadrature_data(sm, chunk, rule)
        ne = qd.weights.shape[0]
        if weight is None:
            w = np.broadcast_to(np.eye(n), (ne, len(rule.weights), n, n))
        elif callable(weight):
            w = np.asarray(weight(qd), dtype=float)
        else:
            w = np.full((ne, len(rule.weights)), float(weight))
        if w.ndim == 2:
            w = w[..., None, None] * np.eye(n)
        if w.shape[-2:] != (n, n):
            raise ValueError(f"weight shape {w.shape} does not match {n} components")
        scalar = np.einsum("eq,qa,qb->eqab", qd.weights, qd.phi, qd.phi)
        blocks = np.einsum("eqab,eqcd->eacbd", scalar, w).reshape(ne, nb * n, nb * n)
        asm.add(space.element_dofs(chunk), blocks)
    return _finish(asm)


def assemble_stiffness_scalar(space: FESpace, rule=None):
    """``A_ij = int grad_S phi_i . grad_S phi_j`` for a scalar space."""
    if space.components != 1:
        raise ValueError("scalar stiffness needs a one-component space")
    sm = space.mesh
    rule = rule or default_rule(sm.order)
    asm = Assembler(space.n_dof)
    for chunk in _chunks(sm.n_elements, len(rule.weights) * 60):
        qd = quadrature_data(sm, chunk, rule)
        blocks = np.einsum("eq,eqag,eqbg->eab", qd.weights, qd.grad, qd.grad)
        asm.add(space.element_dofs(chunk), blocks)
    return _finish(asm)


def _gram(d, weights):
    # element matrices sum_q w_q D_q D_q^T for D of shape (E, Q, L, X)
    ne, nq, nl = d.shape[:3]
    d = d.reshape(ne, nq, nl, -1) * np.sqrt(weights)[:, :, None, None]
    d = np.ascontiguousarray(np.moveaxis(d, 1, 2).reshape(ne, nl, -1))
    return np.matmul(d, np.swapaxes(d, 1, 2))


def assemble_tensor_operator(space: FESpace, rank, rule=None, with_correction=True):
    """``(grad_S u + G(u), grad_S v + G(v))`` on an embedding-layout space."""
    if rank not in (1, 2):
        raise ValueError(f"unsupported tensor rank {rank}")
    n = 3**rank
    if space.components != n:
        raise ValueError(f"rank {rank} needs {n} components, space has {space.components}")
    sm = space.mesh
    rule = rule or default_rule(sm.order)
    nb = sm.elements.shape[1]
    asm = Assembler(space.n_dof)
    per = len(rule.weights) * nb * n * n * 3 * 3
    for chunk in _chunks(sm.n_elements, per):
        qd = quadrature_data(sm, chunk, rule)
        d = covariant_gradient_basis(qd, rank, with_correction)
        ne = d.shape[0]
        d = d.reshape(ne, len(rule.weights), nb * n, n * 3)
        asm.add(space.element_dofs(chunk), _gram(d, qd.weights))
    return _finish(asm)


def assemble_penalty(space: FESpace, rank, rule=None, local_scaling=None):
    """``K_ij = int Q# phi_i . Q# phi_j`` with ``Q# = Id - P#`` from the improved normal.

    The global ``beta h^-2`` factor is left to the caller.  ``local_scaling``,
    if given, maps element diameters ``(E,)`` to a per-element factor.
    """
    n = 3**rank

    def weight(qd):
        w = np.eye(n) - tensor_projector(projector(qd.sharp_normal), rank)
        if local_scaling is not None:
            w = w * np.asarray(local_scaling(qd.diameters))[:, None, None, None]
        return w

    return assemble_mass(space, weight, rule)


def assemble_projected_mass(space: FESpace, rank, rule=None):
    """``(P_h u, P_h v)`` with the index-wise projection of the surface normal."""
    return assemble_mass(space, lambda qd: tensor_projector(projector(qd.normal), rank), rule)


# --------------------------------------------------------- interpolation


def interpolate(space: FESpace, func):
    """Nodal interpolant of ``func(xhat (P, 2), points (P, 3)) -> (P, N)``."""
    vals = np.asarray(func(space.mesh.nodes, space.mesh.points), dtype=float)
    return vals.reshape(space.mesh.n_nodes, space.components).ravel()


def evaluate_field(space: FESpace, u, triangle, bary):
    """Value ``(N,)`` of a finite element field at a located point."""
    phi, _ = eval_basis(space.order, np.asarray(bary, dtype=float))
    nodes = space.mesh.elements[triangle]
    vals = np.asarray(u).reshape(-1, space.components)[nodes]
    return phi @ vals
