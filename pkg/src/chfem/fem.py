"""Continuous Lagrange P1/P2 spaces on a triangulation.

Provides the degree-of-freedom layout, reference basis tables, sparse
mass/stiffness assembly, weighted forms for nonlinear terms, nodal
interpolation, quadrature of pointwise integrands, and point evaluation of
finite element functions.

The quadrature rule attached to a space is exact to degree 4 for q=1 and
degree 8 for q=2.  The degree-8 requirement is what makes the discrete
energy identities of the time stepper hold to solver precision: the
implicit cubic term tested against a P2 function has total degree 3*2+2=8.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from .mesh import Mesh
from .quadrature import rule_for_degree

__all__ = [
    "FeSpace",
    "Field",
    "build_space",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_weighted_mass",
    "assemble_load",
    "interpolate_nodal",
    "integrate",
    "values_at_quadrature",
    "gradients_at_quadrature",
    "evaluate",
]

_QUAD_DEGREE = {1: 4, 2: 8}


def _reference_basis(q: int, pts: np.ndarray):
    """Basis values and reference gradients at points (m, 2).

    Local ordering: vertices 0,1,2 then (for q=2) the midpoints of the
    edges opposite vertices 0, 1, 2.
    """
    xi = pts[:, 0]
    eta = pts[:, 1]
    lam = np.stack([1.0 - xi - eta, xi, eta])          # (3, m)
    glam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if q == 1:
        phi = lam
        dphi = np.broadcast_to(glam[:, None, :], (3, len(pts), 2)).copy()
        return phi, dphi
    if q == 2:
        phi = np.empty((6, len(pts)))
        dphi = np.empty((6, len(pts), 2))
        for i in range(3):
            phi[i] = lam[i] * (2.0 * lam[i] - 1.0)
            dphi[i] = (4.0 * lam[i] - 1.0)[:, None] * glam[i]
        for i, (j, k) in enumerate([(1, 2), (2, 0), (0, 1)]):
            phi[3 + i] = 4.0 * lam[j] * lam[k]
            dphi[3 + i] = 4.0 * (lam[j][:, None] * glam[k] + lam[k][:, None] * glam[j])
        return phi, dphi
    raise ValueError(f"unsupported polynomial degree q={q}")


class FeSpace:
    """Lagrange space of degree q on a mesh, with its quadrature and dof map."""

    def __init__(self, mesh: Mesh, q: int):
        if q not in (1, 2):
            raise ValueError(f"unsupported polynomial degree q={q}, expected 1 or 2")
        self.mesh = mesh
        self.q = q
        self.quadrature = rule_for_degree(_QUAD_DEGREE[q])

        nv = mesh.num_vertices
        if q == 1:
            self.num_dofs = nv
            self.cell_dofs = mesh.triangles.copy()
            self.dof_coords = mesh.vertices.copy()
        else:
            self.num_dofs = nv + mesh.num_edges
            self.cell_dofs = np.hstack([mesh.triangles, nv + mesh.tri_edges])
            self.dof_coords = np.vstack([mesh.vertices, mesh.edge_midpoints()])

        self.basis, self.basis_grad = _reference_basis(q, self.quadrature.points)

        v = mesh.vertices[mesh.triangles]                     # (nt, 3, 2)
        jac = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)  # columns
        self.det_jac = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1]
        inv[:, 0, 1] = -jac[:, 0, 1]
        inv[:, 1, 0] = -jac[:, 1, 0]
        inv[:, 1, 1] = jac[:, 0, 0]
        inv /= self.det_jac[:, None, None]
        self.inv_jac_t = inv.transpose(0, 2, 1)

        # physical quadrature points: x = v0 + J @ xi
        self.quad_points = v[:, None, 0, :] + np.einsum(
            "tij,qj->tqi", jac, self.quadrature.points
        )
        # physical basis gradients, (nt, nloc, nq, 2)
        self.phys_grad = np.einsum("tij,aqj->taqi", self.inv_jac_t, self.basis_grad)
        self._cache: dict = {}

    @property
    def quad_weights(self) -> np.ndarray:
        return self.quadrature.weights


@dataclass
class Field:
    """Coefficient vector of one scalar finite element function."""

    space: FeSpace
    coeffs: np.ndarray

    def copy(self) -> "Field":
        return Field(self.space, self.coeffs.copy())

    def __add__(self, other: "Field") -> "Field":
        return Field(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.space, self.coeffs - other.coeffs)

    def __mul__(self, s: float) -> "Field":
        return Field(self.space, self.coeffs * s)

    __rmul__ = __mul__


def build_space(mesh: Mesh, q: int) -> FeSpace:
    return FeSpace(mesh, q)


def _scatter(space: FeSpace, blocks: np.ndarray) -> csr_matrix:
    nloc = space.cell_dofs.shape[1]
    rows = np.repeat(space.cell_dofs, nloc, axis=1).ravel()
    cols = np.tile(space.cell_dofs, (1, nloc)).ravel()
    mat = coo_matrix((blocks.ravel(), (rows, cols)), shape=(space.num_dofs, space.num_dofs))
    return mat.tocsr()


def local_matrices(space: FeSpace):
    """Per-element mass and stiffness blocks, shapes (nt, nloc, nloc)."""
    w = space.quad_weights
    mass_ref = np.einsum("aq,bq,q->ab", space.basis, space.basis, w)
    mass = space.det_jac[:, None, None] * mass_ref
    stiff = np.einsum("taqi,tbqi,q,t->tab", space.phys_grad, space.phys_grad, w, space.det_jac)
    return mass, stiff


def assemble_mass(space: FeSpace) -> csr_matrix:
    if "mass" not in space._cache:
        mass, _ = local_matrices(space)
        space._cache["mass"] = _scatter(space, mass)
    return space._cache["mass"]


def assemble_stiffness(space: FeSpace) -> csr_matrix:
    if "stiffness" not in space._cache:
        _, stiff = local_matrices(space)
        space._cache["stiffness"] = _scatter(space, stiff)
    return space._cache["stiffness"]


def assemble_weighted_mass(space: FeSpace, weight_at_quad: np.ndarray) -> csr_matrix:
    """Matrix of the form integral(w * psi_j * psi_i) for a weight sampled
    at the quadrature points, shape (nt, nq)."""
    blocks = np.einsum(
        "aq,bq,tq,q,t->tab",
        space.basis,
        space.basis,
        weight_at_quad,
        space.quad_weights,
        space.det_jac,
    )
    return _scatter(space, blocks)


def assemble_load(space: FeSpace, values_at_quad: np.ndarray) -> np.ndarray:
    """Vector of integral(g * psi_i) for g sampled at quadrature points."""
    local = np.einsum(
        "aq,tq,q,t->ta", space.basis, values_at_quad, space.quad_weights, space.det_jac
    )
    out = np.zeros(space.num_dofs)
    np.add.at(out, space.cell_dofs.ravel(), local.ravel())
    return out


def values_at_quadrature(field: Field) -> np.ndarray:
    c = field.coeffs[field.space.cell_dofs]          # (nt, nloc)
    return np.einsum("ta,aq->tq", c, field.space.basis)


def gradients_at_quadrature(field: Field) -> np.ndarray:
    c = field.coeffs[field.space.cell_dofs]
    return np.einsum("ta,taqi->tqi", c, field.space.phys_grad)


def interpolate_nodal(space: FeSpace, f) -> Field:
    """Interpolate a pointwise function at the dof nodes.

    ``f`` is called with (x, y) arrays and must return finite values; a
    non-finite value raises with the offending node named.
    """
    x = space.dof_coords[:, 0]
    y = space.dof_coords[:, 1]
    vals = np.asarray(f(x, y), dtype=float)
    vals = np.broadcast_to(vals, x.shape).copy()
    bad = ~np.isfinite(vals)
    if bad.any():
        k = int(np.argmax(bad))
        raise ValueError(
            f"interpolated function is not finite at dof node {k} "
            f"({space.dof_coords[k, 0]}, {space.dof_coords[k, 1]})"
        )
    return Field(space, vals)


def integrate(space: FeSpace, integrand, fields=()) -> float:
    """Quadrature of a pointwise integrand over the whole domain.

    The integrand is called as ``integrand(x, y, *field_values)`` with
    arrays of quadrature-point coordinates and the sampled values of each
    listed field.  Exact whenever the integrand is polynomial within the
    rule's exactness degree.
    """
    x = space.quad_points[:, :, 0]
    y = space.quad_points[:, :, 1]
    vals = [values_at_quadrature(f) for f in fields]
    g = np.asarray(integrand(x, y, *vals), dtype=float)
    g = np.broadcast_to(g, x.shape)
    if not np.all(np.isfinite(g)):
        t = int(np.argmax(~np.isfinite(g).all(axis=1)))
        raise ValueError(f"integrand is not finite on element {t}")
    return float(np.einsum("tq,q,t->", g, space.quad_weights, space.det_jac))


def evaluate(field: Field, points: np.ndarray) -> np.ndarray:
    """Evaluate a finite element function at arbitrary points in the domain."""
    space = field.space
    tri, bary = space.mesh.locate(points)
    ref = np.column_stack([bary[:, 1], bary[:, 2]])
    phi, _ = _reference_basis(space.q, ref)            # (nloc, m)
    c = field.coeffs[space.cell_dofs[tri]]             # (m, nloc)
    return np.einsum("ma,am->m", c, phi)
