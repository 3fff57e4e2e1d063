from math import factorial

import numpy as np
import pytest

from chfem.quadrature import rule_for_degree


def barycentric_monomial_integral(a, b, c):
    # exact on the reference triangle (area 1/2):
    # integral lam0^a lam1^b lam2^c = 2A * a! b! c! / (a+b+c+2)!
    return factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)


@pytest.mark.parametrize("degree", [4, 8])
def test_exactness_on_barycentric_monomials(degree):
    r = rule_for_degree(degree)
    lam0 = 1 - r.points[:, 0] - r.points[:, 1]
    for total in range(degree + 1):
        for a in range(total + 1):
            for b in range(total - a + 1):
                c = total - a - b
                got = float((r.weights * lam0**a * r.points[:, 0] ** b * r.points[:, 1] ** c).sum())
                exact = barycentric_monomial_integral(a, b, c)
                assert abs(got - exact) <= 1e-12 * abs(exact)


@pytest.mark.parametrize("degree", [4, 8])
def test_random_polynomial_of_declared_degree(degree):
    r = rule_for_degree(degree)
    rng = np.random.default_rng(degree)
    x, y = r.points[:, 0], r.points[:, 1]
    got = 0.0
    exact = 0.0
    for i in range(degree + 1):
        for j in range(degree - i + 1):
            cij = rng.standard_normal()
            got += cij * float((r.weights * x**i * y**j).sum())
            # x^i y^j = lam1^i lam2^j
            exact += cij * barycentric_monomial_integral(0, i, j)
    assert abs(got - exact) <= 1e-12 * max(1.0, abs(exact))


@pytest.mark.parametrize("degree", [4, 8])
def test_points_interior_and_weights_positive(degree):
    r = rule_for_degree(degree)
    assert np.all(r.weights > 0)
    lam0 = 1 - r.points.sum(axis=1)
    assert np.all(r.points >= 0) and np.all(lam0 >= 0)
    assert r.weights.sum() == pytest.approx(0.5, rel=1e-14)


def test_requesting_too_high_degree_fails():
    with pytest.raises(ValueError):
        rule_for_degree(9)
