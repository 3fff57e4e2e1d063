"""Stability diagnostics: energies, per-step records, and a priori summaries.

Every quantity the stability theory tracks is computed here with the same
quadrature the assembly uses, so the discrete dissipation identities hold
to solver precision instead of quadrature error.  The trajectory object
verifies two things on every run:

  * the first-step energy inequality
        E(phi1) + tau*eps*|grad mu_half|^2 + 1/(4 eps)*|phi1-phi0|^2
            <= E(phi0) + eps*tau^2/4 * |discrete_laplacian(mu0)|^2
  * the per-step telescoping identity for the modified energy
        F(phi_new, phi_cur) - F(phi_cur, phi_old)
            = -tau*eps*|grad mu|^2 - 1/(4 eps)*|d2|^2 - eps/8*|grad d2|^2
    with d2 the second difference of the three newest phase fields; this
    is an equality, strictly stronger than monotone decrease.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import fem, operators
from .fem import Field
from .operators import NormKind

__all__ = [
    "DiagnosticsRecord",
    "Trajectory",
    "StabilitySummary",
    "free_energy",
    "modified_energy",
    "first_step_energy_margin",
    "stability_ledger",
    "refinement_growth_flags",
    "write_diagnostics_csv",
    "CSV_HEADER",
]

CSV_HEADER = (
    "step,t,mass,E,F,grad_mu_L2,mu_L2,phi_L2,phi_L4,phi_H1,phi_Linf,"
    "dlap_phi_L2,dtau_phi_L2,newton_iters,newton_residual"
)


def free_energy(phi: Field, epsilon: float) -> float:
    """Ginzburg-Landau energy: well term by quadrature, gradient term exactly."""
    well = fem.integrate(
        phi.space, lambda x, y, p: (p * p - 1.0) ** 2 / (4.0 * epsilon), fields=[phi]
    )
    grad_sq = float(phi.coeffs @ (fem.assemble_stiffness(phi.space) @ phi.coeffs))
    return well + 0.5 * epsilon * grad_sq


def modified_energy(phi_new: Field, phi_old: Field, epsilon: float) -> float:
    """Free energy plus the two positive history terms the scheme dissipates."""
    if phi_new.space is not phi_old.space:
        raise ValueError("modified energy requires fields from the same space")
    d = phi_new.coeffs - phi_old.coeffs
    M = fem.assemble_mass(phi_new.space)
    K = fem.assemble_stiffness(phi_new.space)
    return (
        free_energy(phi_new, epsilon)
        + float(d @ (M @ d)) / (4.0 * epsilon)
        + 0.125 * epsilon * float(d @ (K @ d))
    )


def first_step_energy_margin(phi1, phi0, mu_half, mu0, params) -> float:
    """Right minus left side of the first-step energy inequality (>= 0 expected)."""
    eps = params.epsilon
    tau = params.tau
    dlap_mu0 = operators.norm(operators.discrete_laplacian(mu0), NormKind.L2)
    d = phi1.coeffs - phi0.coeffs
    M = fem.assemble_mass(phi1.space)
    lhs = (
        free_energy(phi1, eps)
        + tau * eps * operators.norm(mu_half, NormKind.H1SEMI) ** 2
        + float(d @ (M @ d)) / (4.0 * eps)
    )
    rhs = free_energy(phi0, eps) + 0.25 * eps * tau**2 * dlap_mu0**2
    return rhs - lhs


@dataclass
class DiagnosticsRecord:
    """One row of per-step monitoring data."""

    m: int
    t: float
    mass: float
    E: float
    F: float
    grad_mu_half_L2: float
    mu_half_L2: float
    phi_L2: float
    phi_L4: float
    phi_H1: float
    phi_Linf: float
    delta_h_phi_L2: float
    dtau_phi_L2: float
    newton_iters: int
    newton_residual: float

    def validate(self):
        vals = [
            self.t, self.mass, self.E, self.F, self.grad_mu_half_L2, self.mu_half_L2,
            self.phi_L2, self.phi_L4, self.phi_H1, self.phi_Linf,
            self.delta_h_phi_L2, self.dtau_phi_L2, self.newton_residual,
        ]
        if not np.all(np.isfinite(vals)):
            raise AssertionError(f"non-finite diagnostics at step {self.m}")
        if self.E < -1e-12 or self.F < self.E - 1e-12:
            raise AssertionError(f"energy ordering violated at step {self.m}")


@dataclass
class Trajectory:
    """Diagnostics series of one run plus the identity bookkeeping.

    Iterating a Trajectory yields its DiagnosticsRecord entries.
    """

    epsilon: float
    tau: float
    mass0: float
    energy0: float
    initial_stability: float
    dlap_mu0_L2: float
    dlap_phi0_L2: float
    records: list = dc_field(default_factory=list)
    second_diff_L2: list = dc_field(default_factory=list)
    second_diff_H1semi: list = dc_field(default_factory=list)
    identity_residuals: list = dc_field(default_factory=list)
    first_step_margin: float | None = None
    F_first: float | None = None

    @classmethod
    def start(cls, state, params) -> "Trajectory":
        phi0, mu0 = state.phi_curr, state.mu0
        dlap_mu0 = operators.norm(operators.discrete_laplacian(mu0), NormKind.L2)
        dlap_phi0 = operators.norm(operators.discrete_laplacian(phi0), NormKind.L2)
        e0 = free_energy(phi0, params.epsilon)
        return cls(
            epsilon=params.epsilon,
            tau=params.tau,
            mass0=operators.mean_value(phi0),
            energy0=e0,
            initial_stability=e0 + params.tau**2 * dlap_mu0**2 + dlap_phi0**2,
            dlap_mu0_L2=dlap_mu0,
            dlap_phi0_L2=dlap_phi0,
        )

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def append_step(self, state, params, newton_report, phi_old: Field | None = None):
        """Record the state after a step; verify the energy law when possible."""
        from .scheme import EnergyLawError  # local import to avoid a cycle

        eps = params.epsilon
        tau = params.tau
        phi = state.phi_curr
        phi_prev = state.phi_prev
        mu = state.mu_half_last
        m = state.m

        grad_mu = operators.norm(mu, NormKind.H1SEMI)
        F_curr = modified_energy(phi, phi_prev, eps)
        d = phi.coeffs - phi_prev.coeffs
        M = fem.assemble_mass(phi.space)
        rec = DiagnosticsRecord(
            m=m,
            t=m * tau,
            mass=operators.mean_value(phi),
            E=free_energy(phi, eps),
            F=F_curr,
            grad_mu_half_L2=grad_mu,
            mu_half_L2=operators.norm(mu, NormKind.L2),
            phi_L2=operators.norm(phi, NormKind.L2),
            phi_L4=operators.norm(phi, NormKind.L4),
            phi_H1=operators.norm(phi, NormKind.H1),
            phi_Linf=operators.norm(phi, NormKind.LINF_NODAL),
            delta_h_phi_L2=operators.norm(operators.discrete_laplacian(phi), NormKind.L2),
            dtau_phi_L2=float(np.sqrt(max(d @ (M @ d), 0.0))) / tau,
            newton_iters=newton_report.iterations,
            newton_residual=newton_report.residuals[-1],
        )
        rec.validate()

        if m == 1:
            self.F_first = F_curr
        else:
            K = fem.assemble_stiffness(phi.space)
            d2 = phi.coeffs - 2.0 * phi_prev.coeffs + phi_old.coeffs
            sd_l2 = float(d2 @ (M @ d2))
            sd_h1 = float(d2 @ (K @ d2))
            self.second_diff_L2.append(sd_l2)
            self.second_diff_H1semi.append(sd_h1)
            residual = (
                F_curr
                - self.records[-1].F
                + tau * eps * grad_mu**2
                + sd_l2 / (4.0 * eps)
                + 0.125 * eps * sd_h1
            )
            self.identity_residuals.append(residual)
            tol = 1e-7 * max(self.F_first, 1e-30)
            if abs(residual) > tol:
                raise EnergyLawError(
                    f"energy identity residual {residual:.3e} exceeds {tol:.3e} at step {m}"
                )
            if F_curr > self.records[-1].F + 1e-8:
                raise EnergyLawError(
                    f"modified energy increased by {F_curr - self.records[-1].F:.3e} at step {m}"
                )
        self.records.append(rec)


@dataclass
class StabilitySummary:
    """Trajectory extrema and sums mirroring the a priori bound quantities."""

    max_grad_phi_sq: float
    max_well_sq: float
    max_phi_L4_4: float
    max_step_diff_sq: float
    max_dlap_phi_sq: float
    max_phi_inf: float
    max_mu_sq: float
    sum_tau_grad_mu_sq: float
    sum_tau_dtau_phi_sq: float
    sum_second_diff: float
    initial_stability: float
    F_first: float
    F_final: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def stability_ledger(trajectory: Trajectory) -> StabilitySummary:
    """Aggregate the boundedness quantities over one completed run."""
    recs = trajectory.records
    if not recs:
        raise ValueError("trajectory holds no records")
    eps = trajectory.epsilon
    tau = trajectory.tau
    max_grad_phi_sq = max(r.phi_H1**2 - r.phi_L2**2 for r in recs)
    max_well_sq = max(4.0 * eps * r.E - 2.0 * eps**2 * (r.phi_H1**2 - r.phi_L2**2) for r in recs)
    return StabilitySummary(
        max_grad_phi_sq=max_grad_phi_sq,
        max_well_sq=max_well_sq,
        max_phi_L4_4=max(r.phi_L4**4 for r in recs),
        max_step_diff_sq=max((tau * r.dtau_phi_L2) ** 2 for r in recs),
        max_dlap_phi_sq=max(r.delta_h_phi_L2**2 for r in recs),
        max_phi_inf=max(r.phi_Linf for r in recs),
        max_mu_sq=max(r.mu_half_L2**2 for r in recs),
        sum_tau_grad_mu_sq=tau * sum(r.grad_mu_half_L2**2 for r in recs),
        sum_tau_dtau_phi_sq=tau * sum(r.dtau_phi_L2**2 for r in recs),
        sum_second_diff=sum(trajectory.second_diff_L2) + sum(trajectory.second_diff_H1semi),
        initial_stability=trajectory.initial_stability,
        F_first=trajectory.F_first,
        F_final=recs[-1].F,
    )


def refinement_growth_flags(coarse: StabilitySummary, fine: StabilitySummary,
                            factor: float = 1.1) -> list[str]:
    """Names of bound quantities that grew under refinement at fixed T.

    The theory provides bounds independent of the step sizes, so any
    quantity growing by more than the slack factor under tau-refinement is
    flagged for inspection.
    """
    flags = []
    for name, c in coarse.as_dict().items():
        f = fine.as_dict()[name]
        if name.startswith(("max_", "sum_")) and f > factor * c + 1e-10:
            flags.append(name)
    return flags


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.17g}"


def write_diagnostics_csv(records, path):
    """Write one row per step with 17 significant digits per float."""
    with open(path, "w") as f:
        f.write(CSV_HEADER + "\n")
        for r in records:
            cells = [
                r.m, r.t, r.mass, r.E, r.F, r.grad_mu_half_L2, r.mu_half_L2,
                r.phi_L2, r.phi_L4, r.phi_H1, r.phi_Linf,
                r.delta_h_phi_L2, r.dtau_phi_L2, r.newton_iters, r.newton_residual,
            ]
            f.write(",".join(_fmt(c) for c in cells) + "\n")
