"""VTK (legacy ASCII) and CSV output of discrete functions."""
from __future__ import annotations

import csv
import os

import numpy as np

from .dgop import DiscreteFunction


def _component_names(U: DiscreteFunction, names=None):
    r = U.space.dim_range
    if names is not None:
        if len(names) != r:
            raise ValueError("one name per solution component is required")
        return list(names)
    return [f"{U.name}_{i}" for i in range(r)] if r > 1 else [U.name]


def _corners(mesh):
    """Corner points of every leaf in VTK ordering, (N, 2**d, 3)."""
    d = mesh.dim
    if d == 1:
        offs = np.array([[0.0], [1.0]])
    else:
        offs = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    pts = mesh.corner[:, None, :] + offs[None] * mesh.h[:, None, :]
    out = np.zeros(pts.shape[:2] + (3,))
    out[..., :d] = pts
    return out, offs


def write_vtk(U: DiscreteFunction, path, cell_data=None, names=None, point_values=True, title=None):
    """Write ``U`` as a legacy ASCII unstructured grid.

    Every leaf becomes an independent line or quad, so discontinuities
    survive.  Cell data holds the means of every component, the refinement
    level and any arrays in ``cell_data``; with ``point_values`` the
    polynomial is also evaluated at each cell's corners.
    """
    mesh = U.mesh
    if not U.is_current():
        raise ValueError("discrete function is stale")
    N = mesh.n_cells
    corners, offs = _corners(mesh)
    nv = corners.shape[1]
    cell_type = 3 if mesh.dim == 1 else 9
    names = _component_names(U, names)
    means = U.means()
    lines = ["# vtk DataFile Version 3.0", (title or U.name)[:250], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {N * nv} double"]
    lines += [" ".join(repr(float(v)) for v in p) for p in corners.reshape(-1, 3)]
    lines.append(f"CELLS {N} {N * (nv + 1)}")
    ids = np.arange(N * nv).reshape(N, nv)
    lines += [f"{nv} " + " ".join(map(str, row)) for row in ids]
    lines.append(f"CELL_TYPES {N}")
    lines += [str(cell_type)] * N
    lines.append(f"CELL_DATA {N}")

    def scalars(name, values, fmt="double"):
        lines.append(f"SCALARS {name} {fmt} 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(repr(float(v)) if fmt == "double" else str(int(v)) for v in values)

    for i, name in enumerate(names):
        scalars(name, means[:, i])
    scalars("level", mesh.level, "int")
    for name, values in (cell_data or {}).items():
        values = np.asarray(values, dtype=float).ravel()
        if values.shape != (N,):
            raise ValueError(f"cell data {name!r} needs one value per cell")
        scalars(name, values)
    if point_values:
        vals = U.values(offs).reshape(N * nv, -1)
        lines.append(f"POINT_DATA {N * nv}")
        for i, name in enumerate(names):
            scalars(f"{name}_point", vals[:, i])
    folder = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(folder):
        raise OSError(f"output directory {folder} does not exist")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_csv_1d(U: DiscreteFunction, path, names=None):
    """Cell centres and component means of a 1D function, sorted by x, with a header row."""
    mesh = U.mesh
    if mesh.dim != 1:
        raise ValueError("CSV output is for 1D meshes")
    names = _component_names(U, names)
    means = U.means()
    order = np.argsort(mesh.centers[:, 0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + names)
        for c in order:
            w.writerow([repr(float(mesh.centers[c, 0]))] + [repr(float(v)) for v in means[c]])
    return path


def write_table(rows, path, header):
    """Plain CSV table with a header row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def read_csv(path):
    """Header and float rows of a CSV written by this module."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])
