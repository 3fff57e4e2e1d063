"""Meshes, refinement, and Lagrange spaces.

Builds the structured right-isosceles triangulation of the unit square,
refines it, and verifies the nesting facts the rest of the package leans
on: exact area partition, the one-boundary-edge rule, and coarse functions
embedding exactly into fine spaces.
"""
import numpy as np

import chfem
from chfem import fem, operators

mesh = chfem.build_uniform(8)
print(f"level 0: n={mesh.n}, h={mesh.h:.4f}, "
      f"{mesh.num_triangles} triangles, {mesh.num_vertices} vertices, {mesh.num_edges} edges")
print(f"  triangle areas sum to {mesh.triangle_areas().sum():.16f}")
print(f"  max boundary edges per triangle: {mesh.boundary_edge_count_per_triangle().max()}")

fine = chfem.refine(mesh)
print(f"level 1: n={fine.n}, h={fine.h:.4f} (exactly half of {mesh.h:.4f})")

space = chfem.build_space(mesh, 2)
fine_space = chfem.build_space(fine, 2)
print(f"\nquadratic space on n=8: {space.num_dofs} dofs "
      f"({mesh.num_vertices} vertices + {mesh.num_edges} edge midpoints)")

# a coarse field prolongs into the fine space without changing anything
f = fem.interpolate_nodal(space, lambda x, y: np.cos(2 * np.pi * x) * y)
pf = operators.prolong(f, fine_space)
for kind in (chfem.NormKind.L2, chfem.NormKind.H1):
    a = operators.norm(f, kind)
    b = operators.norm(pf, kind)
    print(f"  {kind.value} norm: coarse {a:.12f}  prolonged {b:.12f}  (diff {abs(a-b):.2e})")

chfem.write_mesh_vtk(mesh, "mesh_n8.vtk")
print("\nwrote mesh_n8.vtk (legacy ASCII VTK, open in ParaView)")
