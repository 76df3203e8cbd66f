"""BDF time stepping for ``M u' + (A + c K) u = 0``: one BDF-1 start step, then BDF-2."""
from __future__ import annotations

import numpy as np

from .linalg import LinearSolver, SolverError


class TimeStepError(RuntimeError):
    def __init__(self, step, cause):
        super().__init__(f"solver failed at step {step}: {cause}")
        self.step = step


def step_count(t_end, tau, tol=1e-9):
    """Number of steps ``T / tau``; raises if it is not an integer."""
    if tau <= 0:
        raise ValueError("time step must be positive")
    n = t_end / tau
    steps = int(round(n))
    if steps < 1 or abs(n - steps) > tol * max(1.0, n):
        raise ValueError(f"end time {t_end} is not an integer multiple of tau = {tau}")
    return steps


class TimeIntegrator:
    """Fixed-step integrator with factorizations reused across steps.

    ``penalty`` (if any) enters the operator as ``penalty_factor * penalty``.
    The BDF-1 and BDF-2 matrices are set up lazily on first use.
    """

    def __init__(self, mass, stiffness, tau, penalty=None, penalty_factor=0.0,
                 solver="direct", tol=1e-10):
        if tau <= 0:
            raise ValueError("time step must be positive")
        self.mass = mass
        self.tau = float(tau)
        self.operator = stiffness if penalty is None else stiffness + penalty_factor * penalty
        self.method = solver
        self.tol = tol
        self._solvers = {}

    @classmethod
    def for_system(cls, system, tau, **kw):
        return cls(system.mass, system.stiffness, tau, penalty=system.penalty,
                   penalty_factor=system.penalty_factor, **kw)

    def _solver(self, kind):
        if kind not in self._solvers:
            scale = 1.0 if kind == 1 else 1.5
            a = (scale / self.tau) * self.mass + self.operator
            self._solvers[kind] = LinearSolver(a.tocsr(), method=self.method, tol=self.tol)
        return self._solvers[kind]

    def step_bdf1(self, u0):
        rhs = self.mass @ u0 / self.tau
        return self._solver(1).solve(rhs, x0=u0)

    def step_bdf2(self, u_m, u_prev):
        rhs = self.mass @ (2.0 * u_m - 0.5 * u_prev) / self.tau
        return self._solver(2).solve(rhs, x0=2.0 * u_m - u_prev)

    def integrate(self, u0, t_end, obs_times=(), observer=None, on_step=None):
        """Advance from ``t = 0`` to ``t_end``.

        ``observer(t, u)`` is called at each requested time (rounded to the
        step grid; ``t = 0`` is allowed).  ``on_step(m, u)`` sees every step.
        Returns the final state.
        """
        n = step_count(t_end, self.tau)
        wanted = {}
        for t in obs_times:
            m = step_count(t, self.tau) if t > 0 else 0
            if m > n:
                raise ValueError(f"observation time {t} is after the end time {t_end}")
            wanted.setdefault(m, []).append(t)
        u_prev = None
        u = np.array(u0, dtype=float)
        if observer is not None:
            for t in wanted.get(0, ()):
                observer(t, u)
        for m in range(1, n + 1):
            try:
                u_new = self.step_bdf1(u) if m == 1 else self.step_bdf2(u, u_prev)
            except SolverError as exc:
                raise TimeStepError(m, exc) from exc
            u_prev, u = u, u_new
            if on_step is not None:
                on_step(m, u)
            if observer is not None:
                for t in wanted.get(m, ()):
                    observer(t, u)
        return u
