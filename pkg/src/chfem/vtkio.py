"""Legacy ASCII VTK output (UNSTRUCTURED_GRID, triangle cells).

Scalar fields are written as P1 POINT_DATA.  Quadratic fields are sampled
onto the vertices of the once-doubled mesh, whose vertex set is exactly
the quadratic dof node set, so every coefficient is represented.
All floats are printed with 17 significant digits.
"""
from __future__ import annotations

import numpy as np

from . import fem
from .fem import Field
from .mesh import Mesh, build_uniform

__all__ = ["write_mesh_vtk", "write_snapshot"]


def _write_unstructured(f, mesh: Mesh, title: str):
    f.write("# vtk DataFile Version 2.0\n")
    f.write(title + "\n")
    f.write("ASCII\n")
    f.write("DATASET UNSTRUCTURED_GRID\n")
    f.write(f"POINTS {mesh.num_vertices} double\n")
    for x, y in mesh.vertices:
        f.write(f"{x:.17g} {y:.17g} 0\n")
    nt = mesh.num_triangles
    f.write(f"CELLS {nt} {4 * nt}\n")
    for a, b, c in mesh.triangles:
        f.write(f"3 {a} {b} {c}\n")
    f.write(f"CELL_TYPES {nt}\n")
    for _ in range(nt):
        f.write("5\n")


def write_mesh_vtk(mesh: Mesh, path, title: str = "chfem mesh"):
    with open(path, "w") as f:
        _write_unstructured(f, mesh, title)


def write_snapshot(field: Field, path, name: str = "phi"):
    """Write one scalar field; see the module docstring for the layout."""
    space = field.space
    if space.q == 1:
        mesh = space.mesh
        values = field.coeffs
    else:
        mesh = build_uniform(2 * space.mesh.n)
        values = fem.evaluate(field, mesh.vertices)
    if not np.all(np.isfinite(values)):
        raise ValueError("refusing to write non-finite field values")
    with open(path, "w") as f:
        _write_unstructured(f, mesh, f"chfem field {name}")
        f.write(f"POINT_DATA {mesh.num_vertices}\n")
        f.write(f"SCALARS {name} double 1\n")
        f.write("LOOKUP_TABLE default\n")
        for v in values:
            f.write(f"{v:.17g}\n")
