"""Second-order two-step convex-splitting time integrator.

The conserved phase field phi and the chemical potential mu are advanced
together by solving, at each step, the coupled weak system

    (phi_new - phi_cur, nu) + tau * eps * (grad mu, grad nu) = 0
    (1/eps) (cubic_mean(phi_new, phi_cur), psi)
        - (1/eps) (3/2 phi_cur - 1/2 phi_old, psi)
        + eps * (grad(3/4 phi_new + 1/4 phi_old), grad psi)
        - (mu, psi) = 0

for all test functions nu, psi in the same Lagrange space.  The convex
part of the double well is treated implicitly through cubic_mean and the
concave part explicitly through the extrapolated value, which is what
makes the method unconditionally energy stable and uniquely solvable.
Being a two-step method it needs a dedicated first step: the history
average degenerates to phi0 and an extra tau/2 * (grad mu0, grad psi)
load, built from initial chemical potential data mu0, restores second
order accuracy.

The nonlinear systems are solved by damped Newton iteration on the
monolithic stacked (phi, mu) unknowns with the exact Jacobian.  Since the
Jacobian is everywhere nonsingular the Newton direction is a descent
direction for the residual norm, so the damping only ever shortens steps
far from the solution; convergence is monitored, not assumed.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
from scipy.sparse import bmat

from . import diagnostics, fem, operators
from .fem import FeSpace, Field
from .sparse_linalg import Factorization

__all__ = [
    "SchemeParams",
    "SchemeState",
    "InitialCondition",
    "NewtonReport",
    "NewtonError",
    "EnergyLawError",
    "cubic_mean",
    "cubic_mean_grad",
    "newton_solve",
    "initialize",
    "first_step",
    "step",
    "first_step_system",
    "step_system",
    "run",
    "cosine_product_ic",
    "constant_ic",
]


def cubic_mean(a, b):
    """Two-level average of the quartic well's convex derivative.

    Equal arguments reduce it to the plain cubic: cubic_mean(c, c) = c**3.
    """
    return 0.25 * (a * a + b * b) * (a + b)


def cubic_mean_grad(a, b):
    """Partial derivatives of cubic_mean with respect to each argument."""
    da = 0.5 * a * (a + b) + 0.25 * (a * a + b * b)
    db = 0.5 * b * (a + b) + 0.25 * (a * a + b * b)
    return da, db


@dataclass
class SchemeParams:
    """Physical and solver parameters for one trajectory."""

    epsilon: float
    tau: float
    T: float
    q: int = 2
    newton_abs_tol: float = 1e-12
    # keep the relative test from masking the absolute one when a large
    # step length makes the initial residual big; mass conservation relies
    # on the final Newton iterate satisfying the phi equation to roundoff
    newton_rel_tol: float = 1e-15
    newton_max_iter: int = 30
    init_phi_mode: str = "interp"
    init_mu_mode: str = "discrete_variational"

    def __post_init__(self):
        if self.epsilon <= 0 or self.tau <= 0 or self.T <= 0:
            raise ValueError("epsilon, tau and T must be positive")
        if self.newton_abs_tol <= 0 or self.newton_rel_tol <= 0:
            raise ValueError("Newton tolerances must be positive")
        if self.init_phi_mode not in ("interp", "ritz"):
            raise ValueError(f"unknown init_phi_mode {self.init_phi_mode!r}")
        if self.init_mu_mode not in ("discrete_variational", "ritz_analytic"):
            raise ValueError(f"unknown init_mu_mode {self.init_mu_mode!r}")

    def num_steps(self) -> int:
        m = round(self.T / self.tau)
        if m < 1 or abs(m * self.tau - self.T) > 1e-12 * max(1.0, self.T):
            raise ValueError(f"tau={self.tau} does not divide T={self.T}")
        return m


@dataclass
class InitialCondition:
    """Pointwise initial data, with optional derivatives for projection modes.

    ``value`` is mandatory.  ``grad`` and ``mean`` feed the Ritz mode for
    phi; ``laplacian`` and ``grad_laplacian`` additionally feed the
    analytic Ritz construction of the initial chemical potential.
    """

    value: Callable
    grad: Callable | None = None
    laplacian: Callable | None = None
    grad_laplacian: Callable | None = None
    mean: float | None = None


def constant_ic(c: float) -> InitialCondition:
    return InitialCondition(
        value=lambda x, y: np.full_like(np.asarray(x, dtype=float), c),
        grad=lambda x, y: (np.zeros_like(x), np.zeros_like(x)),
        laplacian=lambda x, y: np.zeros_like(x),
        grad_laplacian=lambda x, y: (np.zeros_like(x), np.zeros_like(x)),
        mean=c,
    )


def cosine_product_ic() -> InitialCondition:
    """Benchmark datum 0.5*(1-cos(4 pi x))*(1-cos(2 pi y)) - 1.

    Smooth, mean -1/2, homogeneous Neumann compatible; produces an
    immediate spinodal-like rearrangement that exercises the nonlinearity.
    """
    a = 4.0 * np.pi
    b = 2.0 * np.pi

    def value(x, y):
        return 0.5 * (1.0 - np.cos(a * x)) * (1.0 - np.cos(b * y)) - 1.0

    def grad(x, y):
        gx = 0.5 * a * np.sin(a * x) * (1.0 - np.cos(b * y))
        gy = 0.5 * b * (1.0 - np.cos(a * x)) * np.sin(b * y)
        return gx, gy

    def laplacian(x, y):
        return 0.5 * a * a * np.cos(a * x) * (1.0 - np.cos(b * y)) + 0.5 * b * b * (
            1.0 - np.cos(a * x)
        ) * np.cos(b * y)

    def grad_laplacian(x, y):
        gx = -0.5 * a**3 * np.sin(a * x) * (1.0 - np.cos(b * y)) + 0.5 * a * b * b * np.sin(
            a * x
        ) * np.cos(b * y)
        gy = 0.5 * a * a * b * np.cos(a * x) * np.sin(b * y) - 0.5 * b**3 * (
            1.0 - np.cos(a * x)
        ) * np.sin(b * y)
        return gx, gy

    return InitialCondition(
        value=value,
        grad=grad,
        laplacian=laplacian,
        grad_laplacian=grad_laplacian,
        mean=-0.5,
    )


@dataclass
class SchemeState:
    """Moving window of fields a two-step recurrence needs."""

    m: int
    phi_curr: Field
    phi_prev: Field | None
    mu_half_last: Field | None
    mu0: Field


@dataclass
class NewtonReport:
    iterations: int
    residuals: list = dc_field(default_factory=list)
    converged: bool = True


class NewtonError(RuntimeError):
    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = list(residuals)


class EnergyLawError(AssertionError):
    pass


def newton_solve(residual_fn, jacobian_fn, x0, abs_tol, rel_tol, max_iter):
    """Damped Newton iteration with exact Jacobian.

    Stops when the stacked residual 2-norm falls below abs_tol or below
    rel_tol times the initial residual.  The step is halved up to 10 times
    whenever the residual norm fails to decrease sufficiently; the best
    trial is kept if no halving succeeds.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = residual_fn(x)
    rnorm = float(np.linalg.norm(r))
    history = [rnorm]
    if not np.isfinite(rnorm):
        raise NewtonError("non-finite residual at initial guess", history)
    target = max(abs_tol, rel_tol * rnorm)
    for it in range(1, max_iter + 1):
        if rnorm <= target:
            return x, NewtonReport(iterations=it - 1, residuals=history)
        J = jacobian_fn(x)
        d = Factorization(J).solve(-r, tol=1e-8)[0]
        alpha = 1.0
        best = None
        accepted = False
        for _ in range(11):
            x_try = x + alpha * d
            r_try = residual_fn(x_try)
            n_try = float(np.linalg.norm(r_try))
            if np.isfinite(n_try) and (best is None or n_try < best[0]):
                best = (n_try, x_try, r_try)
            if np.isfinite(n_try) and n_try <= (1.0 - 1e-4 * alpha) * rnorm:
                accepted = True
                break
            alpha *= 0.5
        if best is None:
            raise NewtonError("residual diverged to non-finite values", history)
        if accepted:
            rnorm, x, r = n_try, x_try, r_try
        elif best[0] < rnorm:
            rnorm, x, r = best
        else:
            raise NewtonError(
                f"Newton stalled at residual {rnorm:.3e} (target {target:.3e})", history
            )
        history.append(rnorm)
    if rnorm <= target:
        return x, NewtonReport(iterations=max_iter, residuals=history)
    raise NewtonError(
        f"Newton did not reach residual {target:.3e} in {max_iter} iterations "
        f"(last {rnorm:.3e})",
        history,
    )


def _coupled_system(space, params, phi_cur, known_load, check_weight):
    """Residual and Jacobian closures for one implicit solve.

    The unknown vector stacks (phi_new, mu).  ``known_load`` collects every
    mu-equation term that does not depend on the unknowns; ``check_weight``
    is the coefficient of K phi_new in the mu equation (eps/2 on the first
    step, 3 eps/4 afterwards).  The phi equation is scaled by tau so both
    blocks stay comparably sized for any step length.
    """
    eps = params.epsilon
    tau = params.tau
    M = fem.assemble_mass(space)
    K = fem.assemble_stiffness(space)
    n = space.num_dofs
    phi_cur_quad = fem.values_at_quadrature(Field(space, phi_cur))

    def split(x):
        return x[:n], x[n:]

    def residual(x):
        phi_new, mu = split(x)
        q_new = fem.values_at_quadrature(Field(space, phi_new))
        nonlin = fem.assemble_load(space, cubic_mean(q_new, phi_cur_quad))
        r_phi = M @ (phi_new - phi_cur) + tau * eps * (K @ mu)
        r_mu = nonlin / eps + check_weight * (K @ phi_new) - M @ mu + known_load
        return np.concatenate([r_phi, r_mu])

    def jacobian(x):
        phi_new, _ = split(x)
        q_new = fem.values_at_quadrature(Field(space, phi_new))
        w, _ = cubic_mean_grad(q_new, phi_cur_quad)
        W = fem.assemble_weighted_mass(space, w)
        return bmat(
            [[M, tau * eps * K], [W / eps + check_weight * K, -M]], format="csc"
        )

    return residual, jacobian


def first_step_system(space, params: SchemeParams, phi0: Field, mu0: Field):
    """Stacked residual/Jacobian for the initialization step."""
    eps = params.epsilon
    tau = params.tau
    M = fem.assemble_mass(space)
    K = fem.assemble_stiffness(space)
    known = (
        -(M @ phi0.coeffs) / eps
        + 0.5 * tau * (K @ mu0.coeffs)
        + 0.5 * eps * (K @ phi0.coeffs)
    )
    return _coupled_system(space, params, phi0.coeffs, known, 0.5 * eps)


def step_system(space, params: SchemeParams, phi_curr: Field, phi_prev: Field):
    """Stacked residual/Jacobian for a regular two-step update."""
    eps = params.epsilon
    M = fem.assemble_mass(space)
    K = fem.assemble_stiffness(space)
    extrapolated = 1.5 * phi_curr.coeffs - 0.5 * phi_prev.coeffs
    known = -(M @ extrapolated) / eps + 0.25 * eps * (K @ phi_prev.coeffs)
    return _coupled_system(space, params, phi_curr.coeffs, known, 0.75 * eps)


def initialize(params: SchemeParams, space: FeSpace, ic: InitialCondition) -> SchemeState:
    """Build phi0 and mu0 according to the configured initialization modes."""
    if params.init_phi_mode == "interp":
        phi0 = fem.interpolate_nodal(space, ic.value)
    else:
        if ic.grad is None or ic.mean is None:
            raise ValueError("ritz initialization for phi requires grad and mean data")
        phi0 = operators.ritz_project(space, ic.grad, ic.mean)

    eps = params.epsilon
    if params.init_mu_mode == "discrete_variational":
        # (mu0, psi) = (1/eps) ((phi0^3 - phi0), psi) + eps (grad phi0, grad psi)
        q0 = fem.values_at_quadrature(phi0)
        b = fem.assemble_load(space, q0**3 - q0) / eps + eps * (
            fem.assemble_stiffness(space) @ phi0.coeffs
        )
        coeffs, _ = operators._ops(space)["mass_lu"].solve(b)
        mu0 = Field(space, coeffs)
    else:
        if ic.grad is None or ic.laplacian is None or ic.grad_laplacian is None:
            raise ValueError(
                "ritz_analytic initialization for mu requires grad, laplacian "
                "and grad_laplacian data"
            )

        def mu_grad(x, y):
            gx, gy = ic.grad(x, y)
            lx, ly = ic.grad_laplacian(x, y)
            v = ic.value(x, y)
            factor = (3.0 * v * v - 1.0) / eps
            return factor * gx - eps * lx, factor * gy - eps * ly

        # For Neumann-compatible data the Laplacian integrates to zero, so
        # the mean of mu0 reduces to the well term, quadratured here.
        mu_mean = (
            fem.integrate(space, lambda x, y: ic.value(x, y) ** 3 - ic.value(x, y)) / eps
        )
        mu0 = operators.ritz_project(space, mu_grad, mu_mean)

    if not np.all(np.isfinite(phi0.coeffs)) or not np.all(np.isfinite(mu0.coeffs)):
        raise ValueError("initialization produced non-finite fields")
    return SchemeState(m=0, phi_curr=phi0, phi_prev=None, mu_half_last=None, mu0=mu0)


def _solve_step(space, params, systems, phi_guess, mu_guess):
    residual, jacobian = systems
    x0 = np.concatenate([phi_guess, mu_guess])
    x, report = newton_solve(
        residual,
        jacobian,
        x0,
        params.newton_abs_tol,
        params.newton_rel_tol,
        params.newton_max_iter,
    )
    n = space.num_dofs
    phi_new = Field(space, x[:n])
    mu_half = Field(space, x[n:])
    if not np.all(np.isfinite(phi_new.coeffs)) or not np.all(np.isfinite(mu_half.coeffs)):
        raise NewtonError("solve produced non-finite fields", report.residuals)
    return phi_new, mu_half, report


def first_step(state: SchemeState, params: SchemeParams):
    """Advance from m=0, checking mass conservation and first-step stability."""
    if state.m != 0 or state.mu0 is None:
        raise ValueError("first_step requires the freshly initialized state")
    space = state.phi_curr.space
    phi0, mu0 = state.phi_curr, state.mu0
    systems = first_step_system(space, params, phi0, mu0)
    phi1, mu_half, report = _solve_step(space, params, systems, phi0.coeffs, mu0.coeffs)

    _check_mass(phi1, phi0, report)
    margin = diagnostics.first_step_energy_margin(phi1, phi0, mu_half, mu0, params)
    if margin < -1e-8:
        raise EnergyLawError(f"first-step energy inequality violated by {-margin:.3e}")
    return phi1, mu_half, report


def step(state: SchemeState, params: SchemeParams):
    """Advance one regular step from m >= 1, checking the energy law."""
    if state.m < 1 or state.phi_prev is None:
        raise ValueError("step requires both history fields; run first_step first")
    space = state.phi_curr.space
    systems = step_system(space, params, state.phi_curr, state.phi_prev)
    guess_phi = 2.0 * state.phi_curr.coeffs - state.phi_prev.coeffs
    guess_mu = state.mu_half_last.coeffs
    phi_new, mu_half, report = _solve_step(space, params, systems, guess_phi, guess_mu)
    _check_mass(phi_new, state.phi_curr, report)
    return phi_new, mu_half, report


def _check_mass(phi_new: Field, phi_ref: Field, report: NewtonReport):
    """One-step conservation guard.

    The mass change equals the mean of the converged phi-equation
    residual, so the provable per-step bound is sqrt(dofs) times the final
    Newton residual; the absolute floor covers the accuracy regime where
    the residual is at roundoff.
    """
    m_new = operators.mean_value(phi_new)
    m_ref = operators.mean_value(phi_ref)
    slack = 2.0 * np.sqrt(2.0 * phi_new.space.num_dofs) * report.residuals[-1]
    if abs(m_new - m_ref) > max(1e-10 * abs(m_ref) + 1e-12, slack):
        raise AssertionError(f"mass drifted by {m_new - m_ref:.3e} in one step")


def run(params: SchemeParams, space: FeSpace, ic: InitialCondition, observers=()):
    """Execute a full trajectory and collect per-step diagnostics.

    Returns a Trajectory (a sequence of DiagnosticsRecord plus the initial
    stability data and per-step energy identity residuals).  Raises
    EnergyLawError if the dissipation identity fails beyond roundoff.
    """
    num_steps = params.num_steps()
    state = initialize(params, space, ic)
    traj = diagnostics.Trajectory.start(state, params)

    phi1, mu_half, report = first_step(state, params)
    traj.first_step_margin = diagnostics.first_step_energy_margin(
        phi1, state.phi_curr, mu_half, state.mu0, params
    )
    state = SchemeState(
        m=1, phi_curr=phi1, phi_prev=state.phi_curr, mu_half_last=mu_half, mu0=state.mu0
    )
    traj.append_step(state, params, report)
    for obs in observers:
        obs(state, traj.records[-1])

    for _ in range(1, num_steps):
        phi_new, mu_half, report = step(state, params)
        prev = state
        state = SchemeState(
            m=prev.m + 1,
            phi_curr=phi_new,
            phi_prev=prev.phi_curr,
            mu_half_last=mu_half,
            mu0=prev.mu0,
        )
        traj.append_step(state, params, report, phi_old=prev.phi_prev)
        for obs in observers:
            obs(state, traj.records[-1])
    return traj
