"""Intrinsic surface FEM in the orthogonalized tangent frame (ranks 0 and 1).

Vector fields are ``u = u^1 t~_1 + u^2 t~_2`` with contravariant frame
components stored node-major (``node * 2 + i``).  The frame is evaluated
from the exact chart at every quadrature point.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem
from .geometry import eval_geometry, inv2
from .linalg import Assembler


class UnsupportedRankError(ValueError):
    pass


@dataclass
class FrameQuadData:
    weights: np.ndarray     # (E, Q) quadrature weight times sqrt|g~|
    phi: np.ndarray         # (Q, nb)
    grad_s: np.ndarray      # (E, Q, nb, 2) derivatives along t~_1, t~_2
    lengths: np.ndarray     # (E, Q, 2) frame lengths h_(i)
    connection: np.ndarray  # (E, Q, 2, 2, 2) [j, l, k]
    frame: np.ndarray       # (E, Q, 2, 3)
    normal: np.ndarray      # (E, Q, 3)


def frame_quadrature_data(sm, elems, rule) -> FrameQuadData:
    phi, dphi = fem.eval_basis(sm.order, rule.points)
    origin, a = fem.param_affine(sm, elems)
    xhat = origin[:, None, :] + np.einsum("eij,qj->eqi", a, rule.points[:, 1:])
    geo = eval_geometry(sm.chart, xhat)
    ainv, det_a = inv2(a)
    # parameter-plane gradients: A^-T grad_ref
    grad_hat = np.einsum("eji,qbj->eqbi", ainv, dphi)
    grad_s = np.einsum("eqia,eqba->eqbi", geo.coord_change, grad_hat)
    weights = rule.weights * 0.5 * np.abs(det_a)[:, None] * geo.area_element
    return FrameQuadData(weights=weights, phi=phi, grad_s=grad_s, lengths=geo.frame_lengths,
                         connection=geo.connection, frame=geo.frame, normal=geo.normal)


def intrinsic_inner_product(u, v, lengths, rank):
    """Pointwise ``<u, v>`` in the metric ``diag(h_1^2, h_2^2)``.

    Rank 0: ``u v``; rank 1: ``sum_i h_i^2 u^i v^i``; rank 2:
    ``sum_ij h_i^2 h_j^2 u^ij v^ij``.  The area element is not included.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    h2 = np.asarray(lengths, dtype=float) ** 2
    if rank == 0:
        return u * v
    if rank == 1:
        return np.sum(h2 * u * v, axis=-1)
    if rank == 2:
        return np.einsum("...i,...j,...ij,...ij->...", h2, h2, u, v)
    raise UnsupportedRankError(f"unsupported tensor rank {rank}")


def area_element(lengths):
    return np.prod(lengths, axis=-1)


def scalar_surface_gradient(grad_hat, coord_change, lengths):
    """Contravariant frame components ``g~^-1 W grad_hat`` of a scalar gradient."""
    ds = np.einsum("...ia,...a->...i", coord_change, grad_hat)
    return ds / np.asarray(lengths) ** 2


def vector_covariant_gradient(u, du_ds, connection, lengths):
    """``[grad u]^{ij} = g~^{ii} (d u^j / d s^i + conn^j_{ik} u^k)``.

    ``du_ds[..., j, l]`` is the derivative of component ``j`` along frame
    vector ``l``; ``connection[..., j, l, k]`` as in :class:`GeometryEval`.
    """
    cov = np.swapaxes(du_ds, -1, -2) + np.einsum("...jik,...k->...ij", connection, u)
    return cov / (np.asarray(lengths) ** 2)[..., :, None]


@dataclass
class IntrinsicSystem:
    space: fem.FESpace
    rank: int
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix

    penalty = None
    penalty_factor = 0.0

    @property
    def operator(self):
        return self.stiffness

    def push_forward(self, values, frame):
        """Embedding vector ``u^i t~_i`` from frame components."""
        if self.rank == 0:
            return values
        return np.einsum("...i,...ia->...a", values, frame)

    def interpolate(self, func):
        """Nodal interpolant of an embedding-valued ``func(xhat, points) -> (P, 3**n)``.

        For rank 1 the embedding vector is decomposed onto the frame at each node.
        """
        sm = self.space.mesh
        vals = np.asarray(func(sm.nodes, sm.points), dtype=float)
        if self.rank == 0:
            return vals.reshape(-1)
        geo = eval_geometry(sm.chart, sm.nodes)
        comps = np.einsum("pa,pia->pi", vals.reshape(-1, 3), geo.frame) / geo.frame_lengths**2
        return comps.ravel()

    def evaluate(self, u, triangle, bary):
        """Embedding value at a located point (frame taken at that point)."""
        sm = self.space.mesh
        vals = fem.evaluate_field(self.space, u, triangle, bary)
        if self.rank == 0:
            return vals
        phi, _ = fem.eval_basis(1, bary)
        xhat = phi @ sm.nodes[sm.elements[triangle, :3]]
        geo = eval_geometry(sm.chart, xhat)
        return self.push_forward(vals, geo.frame)

    def normal_residual(self, u, rule=None):
        """``||<u, n>||_L2 / ||u||_L2`` of the pushed-forward field."""
        if self.rank == 0:
            return 0.0
        sm = self.space.mesh
        rule = rule or fem.default_rule(sm.order)
        num = den = 0.0
        nodal = u.reshape(-1, 2)
        for chunk in fem._chunks(sm.n_elements, 60):
            qd = frame_quadrature_data(sm, chunk, rule)
            comps = np.einsum("qv,evi->eqi", qd.phi, nodal[sm.elements[chunk]])
            vec = self.push_forward(comps, qd.frame)
            num += np.sum(qd.weights * np.einsum("eqa,eqa->eq", vec, qd.normal) ** 2)
            den += np.sum(qd.weights * np.einsum("eqa,eqa->eq", vec, vec))
        return float(np.sqrt(num / den)) if den > 0 else 0.0


def build_isfem_system(sm, rank, rule=None) -> IntrinsicSystem:
    """Mass and stiffness with the metric-weighted quadrature inner product."""
    if rank not in (0, 1):
        raise UnsupportedRankError(
            f"intrinsic FEM is implemented for ranks 0 and 1 only, got rank {rank}")
    rule = rule or fem.default_rule(sm.order)
    ncomp = 2**rank
    space = fem.FESpace(sm, ncomp)
    nb = sm.elements.shape[1]
    nq = len(rule.weights)
    mass = Assembler(space.n_dof)
    stiff = Assembler(space.n_dof)
    eye = np.eye(2)
    for chunk in fem._chunks(sm.n_elements, nq * nb * 40):
        qd = frame_quadrature_data(sm, chunk, rule)
        dofs = space.element_dofs(chunk)
        ne = qd.weights.shape[0]
        scal = np.einsum("eq,qa,qb->eqab", qd.weights, qd.phi, qd.phi)
        if rank == 0:
            mass.add(dofs, scal.sum(axis=1))
            d = qd.grad_s / qd.lengths[:, :, None, :]
            stiff.add(dofs, fem._gram(d, qd.weights))
            continue
        h = qd.lengths
        w = h[..., :, None] ** 2 * eye
        mass.add(dofs, np.einsum("eqab,eqcd->eacbd", scal, w).reshape(ne, 2 * nb, 2 * nb))
        # orthonormal components h_i h_j [grad u]^{ij} for u = phi_a t~_c
        ratio = h[..., None, :] / h[..., :, None]  # [i, j] -> h_j / h_i
        deriv = np.einsum("jc,eqai->eqacij", eye, qd.grad_s)
        conn = np.einsum("eqjic,qa->eqacij", qd.connection, qd.phi)
        d = (deriv + conn) * ratio[:, :, None, None, :, :]
        d = d.reshape(ne, nq, nb * 2, 4)
        stiff.add(dofs, fem._gram(d, qd.weights))
    return IntrinsicSystem(space=space, rank=rank, mass=mass.tocsr(), stiffness=stiff.tocsr())
