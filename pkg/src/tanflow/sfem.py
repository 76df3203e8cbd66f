"""Surface FEM in embedding coordinates with a penalized tangentiality constraint."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem


@dataclass
class ScalarSystem:
    space: fem.FESpace
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix

    rank = 0
    penalty = None
    penalty_factor = 0.0

    @property
    def operator(self):
        return self.stiffness


@dataclass
class TensorSystem:
    """Projected mass ``M_P``, augmented stiffness ``A_G`` and penalty ``K``.

    The time-stepping operator is ``A_G + penalty_factor * K`` with
    ``penalty_factor = beta / h**2`` (or 1 when the penalty was assembled with
    per-element scaling).
    """

    space: fem.FESpace
    rank: int
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    penalty: sp.csr_matrix
    full_mass: sp.csr_matrix
    beta: float
    h: float
    penalty_factor: float

    @property
    def operator(self):
        return self.stiffness + self.penalty_factor * self.penalty

    def normal_residual(self, u):
        """``||Q# u|| / ||u||`` in L2."""
        den = float(u @ (self.full_mass @ u))
        if den == 0.0:
            return 0.0
        return float(np.sqrt(max(u @ (self.penalty @ u), 0.0) / den))


def build_scalar_system(sm, rule=None) -> ScalarSystem:
    space = fem.FESpace(sm, 1)
    return ScalarSystem(
        space=space,
        mass=fem.assemble_mass(space, rule=rule),
        stiffness=fem.assemble_stiffness_scalar(space, rule=rule),
    )


def build_tensor_system(sm, rank, beta=10.0, rule=None, local_penalty=False) -> TensorSystem:
    """Semidiscrete system for tangential rank-1 or rank-2 fields.

    ``h`` is the maximal lifted facet diameter; with ``local_penalty`` the
    factor ``beta h_T^-2`` is applied per element instead.
    """
    if rank not in (1, 2):
        raise ValueError(f"unsupported tensor rank {rank}")
    if beta <= 0:
        raise ValueError("penalty parameter beta must be positive")
    n = 3**rank
    space = fem.FESpace(sm, n)
    h = sm.h
    if local_penalty:
        penalty = fem.assemble_penalty(space, rank, rule, local_scaling=lambda d: beta / d**2)
        factor = 1.0
    else:
        penalty = fem.assemble_penalty(space, rank, rule)
        factor = beta / h**2
    scalar_mass = fem.assemble_mass(fem.FESpace(sm, 1), rule=rule)
    return TensorSystem(
        space=space,
        rank=rank,
        mass=fem.assemble_projected_mass(space, rank, rule),
        stiffness=fem.assemble_tensor_operator(space, rank, rule),
        penalty=penalty,
        full_mass=sp.kron(scalar_mass, sp.identity(n), format="csr"),
        beta=float(beta),
        h=h,
        penalty_factor=factor,
    )
