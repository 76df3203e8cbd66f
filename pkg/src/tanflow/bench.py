"""Bump-surface benchmark: configuration, initial data, observables and the run driver."""
from __future__ import annotations

import csv
import dataclasses
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import isfem, mesh, sfem
from .fem import evaluate_field
from .geometry import DEFAULT_CUTOFF, SurfaceChart, bump_eta, eval_geometry
from .timestep import TimeIntegrator, step_count

log = logging.getLogger(__name__)

EVALUATION_POINTS = {
    "x0": (-0.5, 0.0),
    "x1": (-0.25 * math.sqrt(2.0), 0.25 * math.sqrt(2.0)),
    "x2": (0.0, 0.5),
}
DEFAULT_OBS_TIMES = tuple(round(0.1 * i, 10) for i in range(1, 11))
NORM_FLOOR = 1e-12


class ConfigError(ValueError):
    pass


@dataclass
class BenchmarkConfig:
    method: str = "sfem"
    rank: int = 0
    alpha: float = 1.0
    h: float = 0.011
    dt: float = 1e-3
    order: int = 1
    beta: float = 10.0
    tend: float = 1.0
    eps: float = 0.2
    obs_times: tuple = DEFAULT_OBS_TIMES
    out: str | None = None
    aux: str | None = None
    exact_geometry: bool = False
    grade: mesh.Grading | None = None
    vtk: str | None = None
    local_penalty: bool = False
    solver: str = "direct"

    def validate(self):
        if self.method not in ("sfem", "isfem"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.rank not in (0, 1, 2):
            raise ConfigError(f"rank must be 0, 1 or 2, got {self.rank}")
        if self.method == "isfem" and self.rank == 2:
            raise ConfigError("isfem supports ranks 0 and 1 only")
        if self.order not in (1, 2):
            raise ConfigError("order must be 1 or 2")
        for name in ("h", "dt", "tend", "eps", "beta"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.alpha < 0:
            raise ConfigError("alpha must be nonnegative")
        if self.solver not in ("direct", "cg"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        try:
            step_count(self.tend, self.dt)
            for t in self.obs_times:
                if t < 0 or t > self.tend + 1e-12:
                    raise ValueError(f"observation time {t} outside [0, {self.tend}]")
                if t > 0:
                    step_count(t, self.dt)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def chart(self):
        return SurfaceChart(amplitude=self.alpha)


@dataclass
class ObservationRecord:
    method: str
    rank: int
    alpha: float
    t: float
    point: str
    norm: float
    angle: float
    components: np.ndarray


@dataclass
class BenchResult:
    config: BenchmarkConfig
    records: list
    aux: list = field(default_factory=list)   # (t, mean, energy, normal_residual)
    system: object = None
    final: np.ndarray | None = None

    def value(self, t, point):
        for r in self.records:
            if r.point == point and abs(r.t - t) < 1e-12:
                return r
        raise KeyError((t, point))


# ------------------------------------------------------------- initial data


def delta_eps(s, eps, cutoff=DEFAULT_CUTOFF):
    """Smoothed point mass ``eps^-2 eta(s / eps)``."""
    return bump_eta(np.asarray(s, dtype=float) / eps, cutoff)[0] / eps**2


def peak_direction(rank):
    up = np.array([-1.0, 0.0, 0.0])
    if rank == 0:
        return np.ones(1)
    if rank == 1:
        return up
    return np.outer(up, up).ravel()


def initial_condition(rank, eps, chart):
    """Embedding-valued ``u0(xhat, points) -> (P, 3**rank)``."""
    center = np.asarray(chart.embed(np.zeros(2)), dtype=float)
    direction = peak_direction(rank)

    def u0(xhat, points):
        s = np.linalg.norm(np.asarray(points) - center, axis=-1)
        return delta_eps(s, eps)[:, None] * direction

    return u0


# ------------------------------------------------------------- observables


def observables(u, rank):
    """Frobenius norm and the angle to ``e1`` (``e1 x e1`` for rank 2)."""
    u = np.asarray(u, dtype=float).ravel()
    norm = float(np.linalg.norm(u))
    if norm < NORM_FLOOR:
        return norm, float("nan")
    ref = u[0] / norm
    return norm, float(np.arccos(np.clip(ref, -1.0, 1.0)))


def mean_and_energy(system, u):
    """``1^T M u / area`` (scalar systems, else nan) and ``u^T A u``."""
    energy = float(u @ (system.operator @ u))
    if system.rank != 0:
        return float("nan"), energy
    m = system.mass
    area = float(m.sum())
    return float(np.ones(m.shape[0]) @ (m @ u)) / area, energy


# ------------------------------------------------------------- driver


def build_mesh(config: BenchmarkConfig):
    chart = config.chart()
    pm = mesh.triangulate(chart.box, config.h, config.grade)
    return mesh.lift(pm, chart, order=config.order, exact_geometry=config.exact_geometry)


def build_system(config: BenchmarkConfig, sm):
    if config.method == "isfem":
        return isfem.build_isfem_system(sm, config.rank)
    if config.rank == 0:
        return sfem.build_scalar_system(sm)
    return sfem.build_tensor_system(sm, config.rank, beta=config.beta,
                                    local_penalty=config.local_penalty)


def _initial_vector(config, system):
    u0 = initial_condition(config.rank, config.eps, system.space.mesh.chart)
    if config.method == "isfem":
        return system.interpolate(u0)
    sm = system.space.mesh
    return np.asarray(u0(sm.nodes, sm.points), dtype=float).ravel()


def _point_evaluator(config, system):
    sm = system.space.mesh
    located = {}
    for name, xh in EVALUATION_POINTS.items():
        located[name] = mesh.locate(sm, np.array(xh))

    def evaluate(u):
        out = {}
        for name, (tri, bary) in located.items():
            if config.method == "isfem":
                out[name] = np.atleast_1d(system.evaluate(u, tri, bary))
            else:
                out[name] = np.atleast_1d(evaluate_field(system.space, u, tri, bary))
        return out

    return evaluate


def normal_residual(system, u):
    if system.rank == 0:
        return 0.0
    return float(system.normal_residual(u))


def run(config: BenchmarkConfig, keep_system=False) -> BenchResult:
    """Solve one benchmark case and write the requested outputs."""
    config.validate()
    sm = build_mesh(config)
    log.info("mesh: %d nodes, %d elements, h = %.4g", sm.n_nodes, sm.n_elements, sm.h)
    system = build_system(config, sm)
    u0 = _initial_vector(config, system)
    evaluate = _point_evaluator(config, system)
    records, aux = [], []
    snapshots = []

    def observe(t, u):
        for name, val in evaluate(u).items():
            norm, angle = observables(val, config.rank)
            records.append(ObservationRecord(config.method, config.rank, config.alpha,
                                             float(t), name, norm, angle, val))
        mean, energy = mean_and_energy(system, u)
        aux.append((float(t), mean, energy, normal_residual(system, u)))
        if config.vtk:
            snapshots.append((float(t), u.copy()))

    mean0, energy0 = mean_and_energy(system, u0)
    aux.append((0.0, mean0, energy0, normal_residual(system, u0)))
    integrator = TimeIntegrator.for_system(system, config.dt, solver=config.solver)
    times = sorted(set(float(t) for t in config.obs_times))
    final = integrator.integrate(u0, config.tend, times, observe)
    aux.sort(key=lambda row: row[0])
    # t = 0 may have been requested as an observation time too
    aux = [row for i, row in enumerate(aux) if i == 0 or row[0] != aux[i - 1][0]]
    result = BenchResult(config, records, aux, system if keep_system else None, final)
    if config.out:
        write_csv(config.out, records, config.rank)
        write_aux_csv(aux_path(config), aux)
    if config.vtk:
        write_snapshots(config, system, snapshots)
    return result


# ------------------------------------------------------------- output


def fmt(x):
    return "%.17g" % x


def csv_header(rank):
    return ["method", "rank", "alpha", "t", "point", "norm", "angle"] + \
        [f"c{i}" for i in range(3**rank)]


def write_csv(path, records, rank):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(rank))
        for r in records:
            w.writerow([r.method, r.rank, fmt(r.alpha), fmt(r.t), r.point, fmt(r.norm),
                        fmt(r.angle)] + [fmt(c) for c in r.components])


def aux_path(config):
    if config.aux:
        return config.aux
    root, ext = os.path.splitext(config.out)
    return f"{root}_aux{ext or '.csv'}"


def write_aux_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mean", "energy", "normal_residual"])
        for row in rows:
            w.writerow([fmt(x) for x in row])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def embedding_nodal(config, system, u):
    """Nodal embedding values ``(P, 3**rank)``; intrinsic fields are pushed forward."""
    sm = system.space.mesh
    if config.method == "isfem" and config.rank == 1:
        geo = eval_geometry(sm.chart, sm.nodes)
        return np.einsum("pi,pia->pa", u.reshape(-1, 2), geo.frame)
    return u.reshape(sm.n_nodes, -1)


def write_snapshots(config, system, snapshots):
    from .vtk import write_vtk
    root, ext = os.path.splitext(config.vtk)
    for k, (t, u) in enumerate(snapshots):
        write_vtk(f"{root}_{k:03d}{ext or '.vtk'}", system.space.mesh,
                  point_data={"u": embedding_nodal(config, system, u)},
                  title=f"{config.method} rank {config.rank} alpha {config.alpha:g} t {t:g}")


def config_from_dict(values: dict) -> BenchmarkConfig:
    """Build a config from string or typed values (keys as in the CLI, dashes allowed)."""
    cfg = BenchmarkConfig()
    known = {f.name for f in dataclasses.fields(BenchmarkConfig)}
    for key, val in values.items():
        name = key.replace("-", "_")
        if name not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if val is None:
            continue
        setattr(cfg, name, _coerce(name, val))
    return cfg


def _coerce(name, val):
    if not isinstance(val, str):
        if name == "obs_times":
            return tuple(float(t) for t in val)
        return val
    s = val.strip()
    try:
        if name in ("rank", "order"):
            return int(s)
        if name in ("alpha", "h", "dt", "beta", "tend", "eps"):
            return float(s)
        if name in ("exact_geometry", "local_penalty"):
            low = s.lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(s)
            return low in ("1", "true", "yes", "on")
        if name == "obs_times":
            return tuple(float(t) for t in s.replace(";", ",").split(",") if t.strip())
        if name == "grade":
            return mesh.Grading.parse(s)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {val!r}") from exc
    return s
