"""Sparse symmetric linear algebra: element assembly, Jacobi PCG, direct solves.

Matrices are ``scipy.sparse.csr_matrix`` with sorted column indices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


@dataclass
class SolverReport:
    iterations: int
    residual: float
    converged: bool


class Assembler:
    """Accumulate dense element blocks into a CSR matrix.

    Blocks are merged chunk by chunk in the order they are added, so the
    floating-point summation order of duplicates is fixed for a fixed element
    order and repeated runs are bit-identical.
    """

    def __init__(self, n_dof, drop_zeros=True):
        self.n_dof = int(n_dof)
        self.drop_zeros = drop_zeros
        self._acc = None

    def add(self, dofs, blocks):
        """Add ``blocks[e, i, j]`` at ``(dofs[e, i], dofs[e, j])``."""
        dofs = np.asarray(dofs)
        blocks = np.asarray(blocks, dtype=float)
        if dofs.size and (dofs.min() < 0 or dofs.max() >= self.n_dof):
            raise IndexError("element dof index out of range")
        ne, nl = dofs.shape
        if blocks.shape != (ne, nl, nl):
            raise ValueError(f"block shape {blocks.shape} does not match dofs {dofs.shape}")
        rows = np.broadcast_to(dofs[:, :, None], blocks.shape).ravel()
        cols = np.broadcast_to(dofs[:, None, :], blocks.shape).ravel()
        vals = blocks.ravel()
        if self.drop_zeros:
            keep = vals != 0.0
            rows, cols, vals = rows[keep], cols[keep], vals[keep]
        part = sp.coo_matrix((vals, (rows, cols)), shape=(self.n_dof, self.n_dof)).tocsr()
        part.sum_duplicates()
        self._acc = part if self._acc is None else self._acc + part
        return self

    def tocsr(self):
        if self._acc is None:
            return sp.csr_matrix((self.n_dof, self.n_dof))
        out = self._acc.tocsr()
        out.sort_indices()
        return out


def assemble(dofs, blocks, n_dof):
    """One-shot assembly of element blocks; duplicate entries are summed."""
    return Assembler(n_dof).add(dofs, blocks).tocsr()


def cg_solve(a, b, tol=1e-10, maxit=None, x0=None, precondition=True):
    """Jacobi-preconditioned conjugate gradients for SPD ``a``.

    Convergence means ``||b - a x|| <= tol ||b||``; on failure the report says
    so and the caller decides.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    maxit = 10 * n if maxit is None else maxit
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolverReport(0, 0.0, True)
    if precondition:
        d = a.diagonal()
        if np.any(d <= 0):
            raise SolverError("Jacobi preconditioner needs a positive diagonal")
        dinv = 1.0 / d
    else:
        dinv = np.ones(n)
    r = b - a @ x
    res = np.linalg.norm(r) / bnorm
    if res <= tol:
        return x, SolverReport(0, res, True)
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxit + 1):
        ap = a @ p
        pap = p @ ap
        if pap <= 0:
            raise SolverError("matrix is not positive definite")
        step = rz / pap
        x += step * p
        r -= step * ap
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            return x, SolverReport(it, res, True)
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, SolverReport(maxit, res, False)


class LinearSolver:
    """Solve repeatedly with one fixed SPD matrix.

    ``method="direct"`` factorizes once (sparse LU in symmetric mode);
    ``method="cg"`` runs Jacobi PCG warm-started from a caller guess.
    """

    def __init__(self, a, method="direct", tol=1e-10, maxit=None):
        self.a = sp.csr_matrix(a)
        self.method = method
        self.tol = tol
        self.maxit = maxit
        self.last_report = None
        if method == "direct":
            self._lu = spla.splu(
                self.a.tocsc(),
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        elif method != "cg":
            raise ValueError(f"unknown solver method {method!r}")

    def solve(self, b, x0=None):
        if self.method == "direct":
            x = self._lu.solve(np.asarray(b, dtype=float))
            if not np.all(np.isfinite(x)):
                raise SolverError("direct solve produced non-finite values")
            self.last_report = SolverReport(1, float("nan"), True)
            return x
        x, rep = cg_solve(self.a, b, tol=self.tol, maxit=self.maxit, x0=x0)
        self.last_report = rep
        if not rep.converged:
            raise SolverError(
                f"CG did not converge in {rep.iterations} iterations (residual {rep.residual:.3e})")
        return x
