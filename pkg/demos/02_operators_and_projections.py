"""Projections, the discrete Laplacian, and its inverse.

Shows the Ritz projection converging at second order for quadratic
elements, and the discrete Laplacian / inverse Laplacian pair composing to
the identity on mean-zero functions, which is what the discrete negative
norm is built from.
"""
import math

import numpy as np

import chfem
from chfem import fem, operators

grad = lambda x, y: (-2 * np.pi * np.sin(2 * np.pi * x), np.zeros_like(y))

print("Ritz projection of cos(2 pi x), quadratic elements:")
prev = None
for n in (8, 16, 32, 64):
    space = chfem.build_space(chfem.build_uniform(n), 2)
    p = operators.ritz_project(space, grad, 0.0)
    gp = fem.gradients_at_quadrature(p)
    gx, _ = grad(space.quad_points[:, :, 0], space.quad_points[:, :, 1])
    err = math.sqrt(np.einsum(
        "tq,q,t->",
        (gp[:, :, 0] - gx) ** 2 + gp[:, :, 1] ** 2,
        space.quad_weights,
        space.det_jac,
    ))
    rate = "" if prev is None else f"  rate {math.log2(prev / err):.3f}"
    print(f"  n={n:3d}: |grad error|_L2 = {err:.4e}{rate}")
    prev = err

print("\ndiscrete Laplacian / inverse Laplacian roundtrip (mean-zero field):")
space = chfem.build_space(chfem.build_uniform(16), 2)
rng = np.random.default_rng(0)
v = rng.standard_normal(space.num_dofs)
M = fem.assemble_mass(space)
ones = np.ones(space.num_dofs)
v -= (ones @ (M @ v)) / (ones @ (M @ ones))
field = chfem.Field(space, v)
back = operators.inverse_laplacian(operators.discrete_laplacian(field))
print(f"  |T(L v) + v|_inf = {np.abs(back.coeffs + v).max():.2e}  (composition = -identity)")
print(f"  |v|_L2 = {operators.norm(field, chfem.NormKind.L2):.4f}, "
      f"|v|_(-1,h) = {operators.h_minus1_norm(field):.4f}")
