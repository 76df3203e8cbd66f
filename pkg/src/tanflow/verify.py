"""Quick invariant suite on coarse meshes, used by ``tanflow verify``."""
from __future__ import annotations

import numpy as np

from . import isfem, mesh, sfem
from .bench import initial_condition
from .geometry import SurfaceChart, eval_geometry
from .timestep import TimeIntegrator


def _fd4(func, x, e):
    # fourth-order central difference along e (scaled by |e|)
    return (8 * (func(x + e) - func(x - e)) - (func(x + 2 * e) - func(x - 2 * e))) \
        / (12 * np.linalg.norm(e))


def _fd_geometry(alpha, n=200, step=2e-5, seed=0):
    chart = SurfaceChart(amplitude=alpha)
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.8, -0.2, size=(n, 2))
    # the height has a small curvature jump on the cutoff circle; keep stencils off it
    ring = chart.radius * (1.0 - chart.cutoff)
    x = x[np.abs(np.linalg.norm(x - chart.center, axis=1) - ring) > 3 * step]
    geo = eval_geometry(chart, x)
    err = 0.0
    for a in range(2):
        e = np.zeros(2)
        e[a] = step
        dmu = _fd4(chart.embed, x, e)
        err = max(err, np.abs(dmu - geo.jacobian[..., a]).max())
        dn = _fd4(lambda y: eval_geometry(chart, y).normal, x, e)
        # H t_a = -dn/dx_a
        ht = np.einsum("pab,pb->pa", geo.weingarten, geo.jacobian[..., a])
        err = max(err, np.abs(ht + dn).max())
    return err


def _heat_run(method, rank, alpha, h=0.2, tau=0.01, steps=20):
    chart = SurfaceChart(amplitude=alpha)
    sm = mesh.lift(mesh.triangulate(chart.box, h), chart, exact_geometry=(method == "isfem"))
    if method == "isfem":
        system = isfem.build_isfem_system(sm, rank)
        u0 = system.interpolate(initial_condition(rank, 0.5, chart))
    else:
        system = sfem.build_scalar_system(sm) if rank == 0 else sfem.build_tensor_system(sm, rank)
        u0 = np.asarray(initial_condition(rank, 0.5, chart)(sm.nodes, sm.points)).ravel()
    states = [u0]
    TimeIntegrator.for_system(system, tau).integrate(
        u0, steps * tau, on_step=lambda m, u: states.append(u.copy()))
    return system, states


def run_checks():
    """Return ``[(name, passed, detail)]``."""
    out = []
    err = max(_fd_geometry(a) for a in (0.5, 1.0, 2.0))
    out.append(("geometry finite differences", err < 1e-6, f"max error {err:.2e}"))

    for method in ("sfem", "isfem"):
        system, states = _heat_run(method, 0, 1.0)
        ones = np.ones(system.mass.shape[0])
        heat = np.array([ones @ (system.mass @ u) for u in states])
        drift = np.abs(heat - heat[0]).max() / abs(heat[0])
        out.append((f"{method} scalar heat conservation", drift < 1e-8, f"drift {drift:.2e}"))
        energy = np.array([u @ (system.operator @ u) for u in states])
        growth = np.max(np.diff(energy) / energy[:-1])
        out.append((f"{method} scalar energy decay", growth <= 1e-10, f"max growth {growth:.2e}"))

    scal, s_states = _heat_run("sfem", 0, 0.0)
    vec, v_states = _heat_run("sfem", 1, 0.0)
    dev = max(np.abs(v[0::3] + s).max() for v, s in zip(v_states, s_states))
    normal = max(np.abs(v[2::3]).max() for v in v_states)
    out.append(("flat vector decoupling", dev < 1e-10 and normal < 1e-8,
                f"component deviation {dev:.2e}, normal {normal:.2e}"))

    system, states = _heat_run("isfem", 1, 1.0, steps=5)
    res = max(system.normal_residual(u) for u in states)
    out.append(("isfem tangentiality", res < 1e-12, f"normal residual {res:.2e}"))

    system, _ = _heat_run("sfem", 1, 1.0, steps=1)
    asym = abs(system.stiffness - system.stiffness.T).max()
    rng = np.random.default_rng(1)
    u = rng.standard_normal((20, system.stiffness.shape[0]))
    psd = min(float(v @ (system.stiffness @ v)) for v in u)
    out.append(("sfem vector stiffness symmetric PSD", asym < 1e-12 and psd >= 0,
                f"asymmetry {asym:.2e}, min form {psd:.2e}"))
    return out
