"""Command line entry point: ``tanflow run | mesh-info | verify``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import bench, mesh
from .linalg import SolverError
from .timestep import TimeStepError


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise bench.ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def _add_problem_args(p):
    p.add_argument("--config", help="file of 'key = value' lines; flags override it")
    p.add_argument("--method", choices=["sfem", "isfem"])
    p.add_argument("--rank", type=int, choices=[0, 1, 2])
    p.add_argument("--alpha", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--order", type=int, choices=[1, 2])
    p.add_argument("--exact-geometry", action="store_true", default=None)
    p.add_argument("--grade", help="refinement disc 'cx,cy,radius[,levels]'")


def build_parser():
    parser = argparse.ArgumentParser(prog="tanflow",
                                     description="Tangential tensor heat flow on a bump surface.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve one benchmark case and write CSV")
    _add_problem_args(run)
    run.add_argument("--dt", type=float)
    run.add_argument("--beta", type=float)
    run.add_argument("--tend", type=float)
    run.add_argument("--eps", type=float)
    run.add_argument("--obs-times", help="comma separated observation times")
    run.add_argument("--out", help="CSV output path")
    run.add_argument("--aux", help="auxiliary CSV path (mean, energy, normal residual)")
    run.add_argument("--vtk", help="VTK snapshot path prefix")
    run.add_argument("--local-penalty", action="store_true", default=None)
    run.add_argument("--solver", choices=["direct", "cg"])

    info = sub.add_parser("mesh-info", help="print mesh statistics")
    _add_problem_args(info)

    sub.add_parser("verify", help="run the invariant suite on coarse meshes")
    return parser


def _config(args):
    values = read_config_file(args.config) if args.config else {}
    for key, val in vars(args).items():
        if key in ("command", "config", "verbose") or val is None:
            continue
        values[key] = val
    return bench.config_from_dict(values)


def cmd_run(args):
    cfg = _config(args)
    if not cfg.out:
        raise bench.ConfigError("--out is required")
    cfg.validate()
    bench.run(cfg)
    print(f"wrote {cfg.out}")
    return 0


def cmd_mesh_info(args):
    cfg = _config(args)
    sm = bench.build_mesh(cfg)
    pm = sm.param_mesh
    mesh.check_conformity(pm)
    print(f"vertices      {pm.n_vertices}")
    print(f"triangles     {pm.n_triangles}")
    print(f"order         {sm.order}")
    print(f"nodes         {sm.n_nodes}")
    print(f"h_max         {sm.h:.6g}")
    print(f"h_min         {sm.facet_diameters().min():.6g}")
    print(f"surface area  {sm.facet_areas().sum():.10g}")
    return 0


def cmd_verify(args):
    from .verify import run_checks
    failed = 0
    for name, ok, detail in run_checks():
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failed += not ok
    return 1 if failed else 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": cmd_run, "mesh-info": cmd_mesh_info, "verify": cmd_verify}
    try:
        return handlers[args.command](args)
    except (bench.ConfigError, mesh.MeshError, OSError) as exc:
        print(f"tanflow: error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, TimeStepError) as exc:
        print(f"tanflow: solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
