"""Discrete operators on a Lagrange space.

Ritz and L2 projections, the discrete Laplacian and its inverse on
mean-zero functions, the standard norms plus the discrete H^-1 norm, and
exact coarse-to-fine prolongation on nested meshes.

The discrete H^-1 norm is taken as sqrt((v, T v)) where T inverts the
discrete Laplacian on mean-zero functions; this is the standard discrete
negative-norm construction, adopted here by convention.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

from . import fem
from .fem import FeSpace, Field
from .sparse_linalg import Factorization, MeanConstrainedFactorization, SolverError

__all__ = [
    "NormKind",
    "ritz_project",
    "l2_project",
    "discrete_laplacian",
    "inverse_laplacian",
    "norm",
    "h_minus1_norm",
    "mean_value",
    "prolong",
]


class NormKind(Enum):
    L2 = "L2"
    H1SEMI = "H1semi"
    H1 = "H1"
    L4 = "L4"
    LINF_NODAL = "Linf_nodal"


def _ops(space: FeSpace) -> dict:
    """Per-space cache of assembled matrices and factorizations."""
    cache = space._cache
    if "operator_bundle" not in cache:
        M = fem.assemble_mass(space)
        K = fem.assemble_stiffness(space)
        cache["operator_bundle"] = {
            "M": M,
            "K": K,
            "mass_lu": Factorization(M),
            "stiff_constrained": MeanConstrainedFactorization(K, M),
            "lumped": np.asarray(M @ np.ones(space.num_dofs)),
        }
    return cache["operator_bundle"]


def mean_value(v: Field) -> float:
    """The L2 pairing (v, 1); equals the mean since the domain has unit area."""
    return float(_ops(v.space)["lumped"] @ v.coeffs)


def ritz_project(space: FeSpace, grad, mean: float) -> Field:
    """Elliptic projection matching gradients weakly and pinning the mean.

    ``grad`` is called with (x, y) arrays of quadrature points and returns
    the two gradient components of the target function; ``mean`` is its
    exact integral, supplied by the caller so analytic data stays exact.
    """
    ops = _ops(space)
    x = space.quad_points[:, :, 0]
    y = space.quad_points[:, :, 1]
    gx, gy = grad(x, y)
    gx = np.broadcast_to(np.asarray(gx, dtype=float), x.shape)
    gy = np.broadcast_to(np.asarray(gy, dtype=float), x.shape)
    local = np.einsum(
        "taqi,tqi,q,t->ta",
        space.phys_grad,
        np.stack([gx, gy], axis=-1),
        space.quad_weights,
        space.det_jac,
    )
    b = np.zeros(space.num_dofs)
    np.add.at(b, space.cell_dofs.ravel(), local.ravel())
    # partition of unity makes sum(b) a pure roundoff quantity; clean it so
    # the compatibility check reflects the data, not accumulation noise
    coeffs = ops["stiff_constrained"].solve(b - b.sum() / len(b), mean=mean)
    return Field(space, coeffs)


def l2_project(space: FeSpace, f) -> Field:
    """Mass-matrix projection of a quadrature-evaluable function."""
    ops = _ops(space)
    x = space.quad_points[:, :, 0]
    y = space.quad_points[:, :, 1]
    vals = np.broadcast_to(np.asarray(f(x, y), dtype=float), x.shape)
    b = fem.assemble_load(space, vals)
    coeffs, _ = ops["mass_lu"].solve(b)
    return Field(space, coeffs)


def discrete_laplacian(v: Field) -> Field:
    """The mean-zero function L v defined by (L v, xi) = -(grad v, grad xi)."""
    ops = _ops(v.space)
    coeffs, _ = ops["mass_lu"].solve(-(ops["K"] @ v.coeffs))
    return Field(v.space, coeffs)


def inverse_laplacian(v: Field) -> Field:
    """Solve a(T v, xi) = (v, xi) with T v mean-zero; v must be mean-zero."""
    ops = _ops(v.space)
    vmean = float(ops["lumped"] @ v.coeffs)
    scale = max(1.0, float(np.linalg.norm(v.coeffs)))
    if abs(vmean) > 1e-10 * scale:
        raise SolverError(f"inverse Laplacian requires a mean-zero input, got mean {vmean:.3e}")
    b = ops["M"] @ v.coeffs
    coeffs = ops["stiff_constrained"].solve(b - b.sum() / len(b), mean=0.0)
    return Field(v.space, coeffs)


def norm(v: Field, kind: NormKind) -> float:
    ops = _ops(v.space)
    c = v.coeffs
    if kind is NormKind.L2:
        return float(np.sqrt(max(c @ (ops["M"] @ c), 0.0)))
    if kind is NormKind.H1SEMI:
        return float(np.sqrt(max(c @ (ops["K"] @ c), 0.0)))
    if kind is NormKind.H1:
        return float(np.sqrt(max(c @ (ops["M"] @ c) + c @ (ops["K"] @ c), 0.0)))
    if kind is NormKind.L4:
        return fem.integrate(v.space, lambda x, y, p: p**4, fields=[v]) ** 0.25
    if kind is NormKind.LINF_NODAL:
        # max over dof nodes plus quadrature points; over-samples interior
        # extrema of quadratic elements adequately for monitoring purposes
        return float(
            max(np.abs(c).max(), np.abs(fem.values_at_quadrature(v)).max())
        )
    raise ValueError(f"unknown norm kind {kind!r}")


def h_minus1_norm(v: Field) -> float:
    """Discrete H^-1 norm sqrt((v, T v)) of a mean-zero function."""
    tv = inverse_laplacian(v)
    ops = _ops(v.space)
    return float(np.sqrt(max(v.coeffs @ (ops["M"] @ tv.coeffs), 0.0)))


def prolong(coarse: Field, fine_space: FeSpace) -> Field:
    """Represent a coarse-space function exactly in a nested finer space."""
    if fine_space.q != coarse.space.q:
        raise ValueError("prolongation requires matching polynomial degrees")
    mesh = fine_space.mesh
    chain = []
    while mesh is not None and mesh is not coarse.space.mesh:
        chain.append(mesh)
        mesh = mesh.parent
    if mesh is None:
        raise ValueError("fine space is not a refinement of the coarse field's mesh")
    vals = fem.evaluate(coarse, fine_space.dof_coords)
    return Field(fine_space, vals)
