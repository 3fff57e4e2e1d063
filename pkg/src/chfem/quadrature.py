"""Symmetric quadrature rules on the reference triangle (0,0)-(1,0)-(0,1).

Points are stored as (xi, eta) pairs, weights sum to 1/2 (the reference
area), so ``integral over T = det(J) * sum(w * f(x(xi)))`` for the affine
map with Jacobian J.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = ["TriangleRule", "rule_for_degree"]


class TriangleRule:
    def __init__(self, degree, points, weights):
        points = np.asarray(points, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if np.any(points < -1e-14) or np.any(points.sum(axis=1) > 1 + 1e-14):
            raise ValueError("quadrature points must lie in the reference triangle")
        if not math.isclose(weights.sum(), 0.5, rel_tol=1e-12):
            raise ValueError("weights must sum to the reference area 1/2")
        self.degree = degree
        self.points = points
        self.weights = weights

    def __len__(self):
        return len(self.points)


def _sym3(a):
    # orbit of a point with barycentric signature (a, b, b)
    b = 0.5 * (1.0 - a)
    return [(a, b), (b, a), (b, b)]


def _sym6(a, b):
    c = 1.0 - a - b
    return [(a, b), (b, a), (a, c), (c, a), (b, c), (c, b)]


def _expand(groups):
    pts, wts = [], []
    for w, orbit in groups:
        for p in orbit:
            pts.append(p)
            wts.append(w)
    wts = np.asarray(wts)
    # scale to the reference area; the renormalization absorbs the last
    # digit of the published table so constants integrate exactly
    wts *= 0.5 / wts.sum()
    return pts, wts


# Dunavant tables; weights normalized to sum to 1 before the 1/2 scaling.
_DEGREE4_GROUPS = [
    (0.2233815896780114656950070084, _sym3(0.1081030181680702273633414922)),
    (0.1099517436553218676383263182, _sym3(0.8168475729804585130808570624)),
]

_DEGREE8_GROUPS = [
    (0.1443156076777871682510911105, [(1.0 / 3.0, 1.0 / 3.0)]),
    (0.0950916342672846247938961044, _sym3(0.0814148234145536879423689710)),
    (0.1032173705347182502817915503, _sym3(0.6588613844964795867554129970)),
    (0.0324584976231980803109259283, _sym3(0.8989055433659380490831528988)),
    (0.0272303141744349942648446901, _sym6(0.0083947774099576053372138345, 0.2631128296346381134217857863)),
]

_RULES = {
    4: TriangleRule(4, *_expand(_DEGREE4_GROUPS)),
    8: TriangleRule(8, *_expand(_DEGREE8_GROUPS)),
}


def rule_for_degree(degree: int) -> TriangleRule:
    """Smallest stored rule exact for polynomials of the given total degree."""
    for d in sorted(_RULES):
        if d >= degree:
            return _RULES[d]
    raise ValueError(f"no stored rule of exactness degree >= {degree}")
