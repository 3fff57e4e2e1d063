import numpy as np
import pytest
from scipy.sparse import csr_matrix

import chfem
from chfem import operators, scheme
from chfem.fem import Field, build_space
from chfem.mesh import build_uniform
from chfem.scheme import (
    NewtonError,
    SchemeParams,
    SchemeState,
    constant_ic,
    cosine_product_ic,
    cubic_mean,
    cubic_mean_grad,
    first_step_system,
    initialize,
    newton_solve,
    step_system,
)

EPS = 6.25e-2


# ---------------------------------------------------------------- cubic_mean


def test_cubic_mean_collapses_to_cube():
    for c in (-1.3, -0.2, 0.0, 0.7, 2.0):
        assert cubic_mean(c, c) == pytest.approx(c**3, rel=1e-14, abs=1e-15)


def test_cubic_mean_odd_sum():
    assert cubic_mean(1.0, -1.0) == 0.0


def test_cubic_mean_partials_match_finite_differences():
    a, b = 0.3, -0.7
    h = 1e-6
    da, db = cubic_mean_grad(a, b)
    fd_a = (cubic_mean(a + h, b) - cubic_mean(a - h, b)) / (2 * h)
    fd_b = (cubic_mean(a, b + h) - cubic_mean(a, b - h)) / (2 * h)
    assert abs(da - fd_a) <= 1e-8
    assert abs(db - fd_b) <= 1e-8


# ---------------------------------------------------------------- params


def test_params_validation():
    with pytest.raises(ValueError):
        SchemeParams(epsilon=0.0, tau=0.1, T=1.0)
    with pytest.raises(ValueError):
        SchemeParams(epsilon=0.1, tau=-0.1, T=1.0)
    with pytest.raises(ValueError):
        SchemeParams(epsilon=0.1, tau=0.1, T=1.0, init_phi_mode="nope")


def test_tau_must_divide_T():
    with pytest.raises(ValueError):
        SchemeParams(epsilon=0.1, tau=0.3, T=1.0).num_steps()
    assert SchemeParams(epsilon=0.1, tau=0.25, T=1.0).num_steps() == 4


# ---------------------------------------------------------------- initialize


@pytest.fixture(scope="module")
def sp16():
    return build_space(build_uniform(16), 2)


@pytest.mark.parametrize("mu_mode", ["discrete_variational", "ritz_analytic"])
def test_initialize_zero_field(sp16, mu_mode):
    params = SchemeParams(epsilon=EPS, tau=1e-3, T=1e-3, init_mu_mode=mu_mode)
    state = initialize(params, sp16, constant_ic(0.0))
    assert np.abs(state.phi_curr.coeffs).max() <= 1e-12
    assert np.abs(state.mu0.coeffs).max() <= 1e-9


@pytest.mark.parametrize("mu_mode", ["discrete_variational", "ritz_analytic"])
def test_initialize_unit_field(sp16, mu_mode):
    params = SchemeParams(epsilon=EPS, tau=1e-3, T=1e-3, init_mu_mode=mu_mode)
    state = initialize(params, sp16, constant_ic(1.0))
    assert np.abs(state.phi_curr.coeffs - 1.0).max() <= 1e-12
    assert np.abs(state.mu0.coeffs).max() <= 1e-9


def test_initialize_benchmark_mass(sp16):
    params = SchemeParams(epsilon=EPS, tau=1e-3, T=1e-3)
    state = initialize(params, sp16, cosine_product_ic())
    assert abs(operators.mean_value(state.phi_curr) - (-0.5)) <= 1e-3


def test_initialize_ritz_phi_mode(sp16):
    params = SchemeParams(epsilon=EPS, tau=1e-3, T=1e-3, init_phi_mode="ritz")
    state = initialize(params, sp16, cosine_product_ic())
    assert abs(operators.mean_value(state.phi_curr) - (-0.5)) <= 1e-10


def test_initialize_ritz_analytic_requires_laplacian(sp16):
    params = SchemeParams(epsilon=EPS, tau=1e-3, T=1e-3, init_mu_mode="ritz_analytic")
    bare = scheme.InitialCondition(value=lambda x, y: np.zeros_like(x))
    with pytest.raises(ValueError):
        initialize(params, sp16, bare)


def test_initialize_mu_modes_converge_together():
    # both constructions approximate the same chemical potential, so their
    # relative gap must shrink under refinement (measured: 0.28, 0.091 at
    # n=8, 16 for the benchmark datum)
    pv = SchemeParams(epsilon=EPS, tau=1e-3, T=1e-3, init_mu_mode="discrete_variational")
    pr = SchemeParams(epsilon=EPS, tau=1e-3, T=1e-3, init_mu_mode="ritz_analytic")
    ic = cosine_product_ic()
    gaps = []
    for n in (8, 16):
        sp = build_space(build_uniform(n), 2)
        mu_v = initialize(pv, sp, ic).mu0
        mu_r = initialize(pr, sp, ic).mu0
        gaps.append(
            operators.norm(mu_v - mu_r, chfem.NormKind.L2)
            / operators.norm(mu_r, chfem.NormKind.L2)
        )
    assert gaps[1] <= 0.12
    assert gaps[1] <= 0.5 * gaps[0]


# ---------------------------------------------------------------- newton


def test_newton_zero_iterations_at_root():
    A = np.array([[2.0, 0.0], [0.0, 3.0]])

    def res(x):
        return A @ x

    def jac(x):
        return csr_matrix(A)

    x, report = newton_solve(res, jac, np.zeros(2), 1e-12, 1e-12, 10)
    assert report.iterations == 0


def test_newton_scalar_cubic():
    def res(x):
        return np.array([x[0] ** 3 - 8.0])

    def jac(x):
        return csr_matrix(np.array([[3.0 * x[0] ** 2]]))

    x, report = newton_solve(res, jac, np.array([1.0]), 1e-12, 1e-15, 10)
    assert abs(x[0] - 2.0) <= 1e-12
    assert report.iterations <= 10


def test_newton_nonconvergence_raises():
    def res(x):
        return np.array([np.exp(x[0])])  # no root

    def jac(x):
        return csr_matrix(np.array([[np.exp(x[0])]]))

    with pytest.raises(NewtonError) as err:
        newton_solve(res, jac, np.array([0.0]), 1e-12, 1e-15, 5)
    assert len(err.value.residuals) >= 1


def fd_jacobian(res, x, h=1e-7):
    r0 = res(x)
    J = np.empty((len(r0), len(x)))
    for j in range(len(x)):
        xp = x.copy()
        xp[j] += h
        xm = x.copy()
        xm[j] -= h
        J[:, j] = (res(xp) - res(xm)) / (2 * h)
    return J


@pytest.mark.parametrize("which", ["first", "step"])
def test_jacobian_matches_finite_differences(which):
    space = build_space(build_uniform(2), 1)
    params = SchemeParams(epsilon=EPS, tau=1e-2, T=1e-2, q=1)
    rng = np.random.default_rng(77)
    phi_a = Field(space, rng.standard_normal(space.num_dofs) * 0.4)
    phi_b = Field(space, rng.standard_normal(space.num_dofs) * 0.4)
    if which == "first":
        mu0 = Field(space, rng.standard_normal(space.num_dofs) * 0.2)
        res, jac = first_step_system(space, params, phi_a, mu0)
    else:
        res, jac = step_system(space, params, phi_a, phi_b)
    x = rng.standard_normal(2 * space.num_dofs) * 0.3
    J = jac(x).toarray()
    J_fd = fd_jacobian(res, x)
    assert np.abs(J - J_fd).max() <= 1e-6


# ---------------------------------------------------------------- stepping


def run_constant(c, tau, steps, q=1, n=4):
    space = build_space(build_uniform(n), q)
    params = SchemeParams(epsilon=EPS, tau=tau, T=steps * tau, q=q)
    return chfem.run(params, space, constant_ic(c)), space


@pytest.mark.parametrize("tau", [1e-4, 1e-1, 1.0])
def test_constant_state_is_fixed_point(tau):
    traj, _ = run_constant(0.5, tau, 4)
    for rec in traj.records:
        assert rec.newton_iters <= 1
        assert abs(rec.mass - 0.5) <= 1e-12


def test_constant_diagnostics_constant():
    traj, _ = run_constant(-0.3, 0.1, 10)
    masses = {f"{r.mass:.15e}" for r in traj.records}
    energies = {f"{r.E:.15e}" for r in traj.records}
    assert len(masses) == 1
    assert len(energies) == 1


def test_first_step_constant_fixed_point():
    space = build_space(build_uniform(4), 2)
    params = SchemeParams(epsilon=EPS, tau=0.1, T=0.2)
    c = 0.5
    state = initialize(params, space, constant_ic(c))
    mu_exact = (c**3 - c) / EPS
    assert np.abs(state.mu0.coeffs - mu_exact).max() <= 1e-9
    phi1, mu_half, report = scheme.first_step(state, params)
    assert report.iterations <= 1
    assert np.abs(phi1.coeffs - c).max() <= 1e-9
    assert np.abs(mu_half.coeffs - mu_exact).max() <= 1e-8


def test_first_step_requires_initialized_state(sp16):
    params = SchemeParams(epsilon=EPS, tau=1e-3, T=2e-3)
    state = initialize(params, sp16, constant_ic(0.0))
    state_bad = SchemeState(m=3, phi_curr=state.phi_curr, phi_prev=None,
                            mu_half_last=None, mu0=state.mu0)
    with pytest.raises(ValueError):
        scheme.first_step(state_bad, params)
    with pytest.raises(ValueError):
        scheme.step(state, params)


def test_first_step_energy_inequality_benchmark(sp16):
    # tau = 1e-4 on the benchmark datum: inequality margin must be >= 0
    params = SchemeParams(epsilon=EPS, tau=1e-4, T=2e-4)
    state = initialize(params, sp16, cosine_product_ic())
    phi1, mu_half, _ = scheme.first_step(state, params)
    from chfem.diagnostics import first_step_energy_margin

    margin = first_step_energy_margin(phi1, state.phi_curr, mu_half, state.mu0, params)
    assert margin >= -1e-8


def test_run_single_step():
    space = build_space(build_uniform(4), 1)
    params = SchemeParams(epsilon=EPS, tau=1e-3, T=1e-3, q=1)
    traj = chfem.run(params, space, constant_ic(0.2))
    assert len(traj.records) == 1
    assert traj.records[0].m == 1


def test_short_benchmark_run_energy_law(sp16):
    params = SchemeParams(epsilon=EPS, tau=1e-3, T=0.02)
    traj = chfem.run(params, space=sp16, ic=cosine_product_ic())
    F = [r.F for r in traj.records]
    assert all(b <= a + 1e-8 for a, b in zip(F, F[1:]))
    assert max(abs(r) for r in traj.identity_residuals) <= 1e-7 * traj.F_first
    assert max(abs(r.mass - traj.mass0) for r in traj.records) <= 1e-10 * abs(traj.mass0) + 1e-12
    assert traj.first_step_margin >= -1e-8


def test_run_determinism_bitwise(sp16):
    params = SchemeParams(epsilon=EPS, tau=1e-3, T=5e-3)
    t1 = chfem.run(params, sp16, cosine_product_ic())
    t2 = chfem.run(params, sp16, cosine_product_ic())
    for a, b in zip(t1.records, t2.records):
        assert a.E == b.E
        assert a.F == b.F
        assert a.mass == b.mass


@pytest.mark.parametrize("tau", [1e-4, 1e-2, 1.0, 10.0])
def test_unconditional_solvability_probe(tau):
    space = build_space(build_uniform(16), 2)
    params = SchemeParams(epsilon=EPS, tau=tau, T=2 * tau, newton_abs_tol=1e-10)
    state = initialize(params, space, cosine_product_ic())
    phi1, mu_half, rep1 = scheme.first_step(state, params)
    assert rep1.iterations <= 30
    state1 = SchemeState(m=1, phi_curr=phi1, phi_prev=state.phi_curr,
                         mu_half_last=mu_half, mu0=state.mu0)
    _, _, rep2 = scheme.step(state1, params)
    assert rep2.iterations <= 30


def test_observers_called_every_step(sp16):
    params = SchemeParams(epsilon=EPS, tau=1e-3, T=3e-3)
    seen = []
    chfem.run(params, sp16, constant_ic(0.0), observers=[lambda s, r: seen.append(s.m)])
    assert seen == [1, 2, 3]
