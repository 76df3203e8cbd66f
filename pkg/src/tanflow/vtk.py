"""Legacy ASCII VTK output of lifted meshes with point and cell data."""
from __future__ import annotations

import numpy as np


def _section(kind, name, values):
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    flat = values.reshape(n, -1)
    width = flat.shape[1]
    if width == 1:
        head = [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
    elif width == 3:
        head = [f"VECTORS {name} double"]
    elif width == 9:
        head = [f"TENSORS {name} double"]
    else:
        raise ValueError(f"{kind} field {name!r} has {width} components; need 1, 3 or 9")
    rows = [" ".join("%.17g" % x for x in row) for row in flat]
    return head + rows


def write_vtk(path, sm, point_data=None, cell_data=None, title="tanflow"):
    """Write the lifted triangles (corner vertices only) as an unstructured grid.

    ``point_data`` values are per Lagrange node and ``cell_data`` per triangle;
    each entry has 1, 3 or 9 components.  Higher-order nodes are written as
    points but only the straight corner triangles appear as cells.
    """
    pts = np.asarray(sm.points)
    tris = np.asarray(sm.elements[:, :3])
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {len(pts)} double"]
    lines += [" ".join("%.17g" % x for x in p) for p in pts]
    lines.append(f"CELLS {len(tris)} {4 * len(tris)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in tris]
    lines.append(f"CELL_TYPES {len(tris)}")
    lines += ["5"] * len(tris)
    cell_data = dict(cell_data or {})
    cell_data.setdefault("normal", sm.facet_normal)
    lines.append(f"CELL_DATA {len(tris)}")
    for name, vals in cell_data.items():
        if len(vals) != len(tris):
            raise ValueError(f"cell field {name!r} has {len(vals)} rows for {len(tris)} cells")
        lines += _section("cell", name, vals)
    if point_data:
        lines.append(f"POINT_DATA {len(pts)}")
        for name, vals in point_data.items():
            if len(vals) != len(pts):
                raise ValueError(f"point field {name!r} has {len(vals)} rows for {len(pts)} points")
            lines += _section("point", name, vals)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk_header(path):
    """Counts of points and cells from a legacy file (enough for round-trip checks)."""
    out = {}
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if parts and parts[0] in ("POINTS", "CELLS", "CELL_DATA", "POINT_DATA"):
                out[parts[0]] = int(parts[1])
    return out
