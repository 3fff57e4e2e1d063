"""Structured right-isosceles triangulations of the unit square.

The mesh family is the uniform n-by-n grid of squares on (0,1)^2, each
square split into two triangles along a diagonal picked by the parity of
the cell indices: cell (i, j) with i+j even uses the bottom-left to
top-right diagonal, odd cells use the other one.  For even n this routes a
diagonal through each corner of the domain, so no triangle has more than
one boundary edge.  Doubling n reproduces the midpoint subdivision of
every coarse triangle, which makes the family nested: every coarse edge is
the union of two fine edges and every coarse triangle the union of four
congruent children.
"""
from __future__ import annotations

import numpy as np

__all__ = ["Mesh", "build_uniform", "refine"]


class Mesh:
    """Immutable triangulation of the unit square.

    Attributes
    ----------
    n : int
        Cells per side (even).
    level : int
        Refinement level, 0 for a mesh built directly.
    parent : Mesh or None
        The mesh one refinement level coarser, if built by ``refine``.
    h : float
        Triangle diameter, sqrt(2)/n.
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array
        Vertex indices, counterclockwise.
    edges : (ne, 2) int array
        Deduplicated vertex pairs, each sorted, lexicographic order.
    edge_tris : (ne, 2) int array
        Adjacent triangle indices per edge; -1 marks a missing neighbor
        (boundary edge).
    tri_edges : (nt, 3) int array
        Edge index opposite each local vertex.
    """

    def __init__(self, n: int, level: int = 0, parent: "Mesh | None" = None):
        if n <= 0 or n % 2 != 0:
            raise ValueError(f"cells per side must be a positive even integer, got {n}")
        self.n = n
        self.level = level
        self.parent = parent
        self.h = np.sqrt(2.0) / n

        xs = np.arange(n + 1) / n
        X, Y = np.meshgrid(xs, xs, indexing="xy")
        self.vertices = np.column_stack([X.ravel(), Y.ravel()])

        I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
        i = I.ravel()
        j = J.ravel()
        a = j * (n + 1) + i
        b = j * (n + 1) + i + 1
        c = (j + 1) * (n + 1) + i + 1
        d = (j + 1) * (n + 1) + i
        even = (i + j) % 2 == 0

        # Two triangles per cell; the first one holds the region below
        # (even) or left of (odd) the cell diagonal, so point location can
        # resolve the triangle from local coordinates alone.
        t0 = np.where(even[:, None], np.column_stack([a, b, c]), np.column_stack([a, b, d]))
        t1 = np.where(even[:, None], np.column_stack([a, c, d]), np.column_stack([b, c, d]))
        tris = np.empty((2 * n * n, 3), dtype=np.int64)
        tris[0::2] = t0
        tris[1::2] = t1
        self.triangles = tris

        self._build_edges()
        self._validate()

    def _build_edges(self):
        tris = self.triangles
        raw = np.concatenate([tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]])
        raw.sort(axis=1)
        nv = len(self.vertices)
        keys = raw[:, 0] * nv + raw[:, 1]
        unique_keys, inverse = np.unique(keys, return_inverse=True)
        self.edges = np.column_stack([unique_keys // nv, unique_keys % nv])

        nt = len(tris)
        self.tri_edges = inverse.reshape(3, nt).T.copy()

        self.edge_tris = np.full((len(self.edges), 2), -1, dtype=np.int64)
        tri_ids = np.tile(np.arange(nt), 3)
        order = np.argsort(inverse, kind="stable")
        sorted_edges = inverse[order]
        sorted_tris = tri_ids[order]
        first = np.searchsorted(sorted_edges, np.arange(len(self.edges)), side="left")
        last = np.searchsorted(sorted_edges, np.arange(len(self.edges)), side="right")
        counts = last - first
        if counts.max() > 2:
            raise AssertionError("edge shared by more than two triangles")
        self.edge_tris[:, 0] = sorted_tris[first]
        has_two = counts == 2
        self.edge_tris[has_two, 1] = sorted_tris[last[has_two] - 1]

    def _validate(self):
        v = self.vertices
        t = self.triangles
        e1 = v[t[:, 1]] - v[t[:, 0]]
        e2 = v[t[:, 2]] - v[t[:, 0]]
        areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        if np.any(areas <= 0):
            raise AssertionError("triangle with non-positive orientation")
        if abs(areas.sum() - 1.0) > 1e-14:
            raise AssertionError(f"triangle areas sum to {areas.sum()!r}, not 1")

        # congruence: every triangle has the same sorted edge-length triple
        lengths = np.stack(
            [
                np.linalg.norm(v[t[:, 1]] - v[t[:, 2]], axis=1),
                np.linalg.norm(v[t[:, 2]] - v[t[:, 0]], axis=1),
                np.linalg.norm(v[t[:, 0]] - v[t[:, 1]], axis=1),
            ],
            axis=1,
        )
        lengths.sort(axis=1)
        if np.any(np.abs(lengths - lengths[0]) > 1e-12):
            raise AssertionError("triangles are not congruent")

        if self.boundary_edge_count_per_triangle().max() > 1:
            raise AssertionError("a triangle has more than one boundary edge")

    def boundary_edge_count_per_triangle(self) -> np.ndarray:
        on_boundary = self.edge_tris[:, 1] == -1
        return on_boundary[self.tri_edges].sum(axis=1)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def triangle_areas(self) -> np.ndarray:
        v = self.vertices
        t = self.triangles
        e1 = v[t[:, 1]] - v[t[:, 0]]
        e2 = v[t[:, 2]] - v[t[:, 0]]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    def locate(self, points: np.ndarray):
        """Find containing triangles and barycentric coordinates.

        Points on shared edges resolve to one of the adjacent triangles;
        either is valid for evaluating a C0 function.  Returns
        ``(tri_indices, barycentric)`` with barycentric of shape (m, 3).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.n
        i = np.clip(np.floor(pts[:, 0] * n).astype(np.int64), 0, n - 1)
        j = np.clip(np.floor(pts[:, 1] * n).astype(np.int64), 0, n - 1)
        xl = pts[:, 0] * n - i
        yl = pts[:, 1] * n - j
        even = (i + j) % 2 == 0
        second = np.where(even, yl > xl, xl + yl > 1.0)
        tri = 2 * (j * n + i) + second.astype(np.int64)

        v = self.vertices
        t = self.triangles[tri]
        v0 = v[t[:, 0]]
        m00 = v[t[:, 1], 0] - v0[:, 0]
        m01 = v[t[:, 2], 0] - v0[:, 0]
        m10 = v[t[:, 1], 1] - v0[:, 1]
        m11 = v[t[:, 2], 1] - v0[:, 1]
        det = m00 * m11 - m01 * m10
        rx = pts[:, 0] - v0[:, 0]
        ry = pts[:, 1] - v0[:, 1]
        l1 = (m11 * rx - m01 * ry) / det
        l2 = (-m10 * rx + m00 * ry) / det
        bary = np.column_stack([1.0 - l1 - l2, l1, l2])
        return tri, bary


def build_uniform(n: int) -> Mesh:
    """Build the level-0 parity-diagonal triangulation with ``n`` cells per side."""
    return Mesh(n)


def refine(mesh: Mesh) -> Mesh:
    """Return the mesh with n doubled, linked to ``mesh`` as its parent.

    The doubled parity-diagonal construction coincides with subdividing
    each coarse triangle into four congruent children; this is verified
    here rather than assumed.
    """
    fine = Mesh(2 * mesh.n, level=mesh.level + 1, parent=mesh)

    # nesting check 1: each coarse triangle picks up exactly 4 children
    centroids = fine.vertices[fine.triangles].mean(axis=1)
    owner, _ = mesh.locate(centroids)
    counts = np.bincount(owner, minlength=mesh.num_triangles)
    if not np.all(counts == 4):
        raise AssertionError("refinement does not split each triangle into 4 children")

    # nesting check 2: each coarse edge is the union of two fine edges
    fine_keys = set(map(tuple, fine.edges.tolist()))
    coarse_v = mesh.vertices
    mids = mesh.edge_midpoints()
    fn = fine.n
    mid_idx = np.round(mids[:, 1] * fn).astype(np.int64) * (fn + 1) + np.round(
        mids[:, 0] * fn
    ).astype(np.int64)
    end_idx = np.round(coarse_v[:, 1] * fn).astype(np.int64)[mesh.edges] * (fn + 1) + np.round(
        coarse_v[:, 0] * fn
    ).astype(np.int64)[mesh.edges]
    for (a, b), m in zip(end_idx.tolist(), mid_idx.tolist()):
        if (min(a, m), max(a, m)) not in fine_keys or (min(m, b), max(m, b)) not in fine_keys:
            raise AssertionError("a coarse edge is not the union of two fine edges")

    return fine
