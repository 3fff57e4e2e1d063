"""Sparse linear solves for projections, discrete operators and Newton steps.

Direct factorization (SuperLU) is the default at the problem sizes this
package targets; a conjugate-gradient path is kept behind the same
interface for SPD systems.  Every solve verifies its own residual before
returning, guarding against silent factorization failure.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import bmat, csc_matrix, csr_matrix
from scipy.sparse.linalg import cg, splu

__all__ = [
    "LinearSolveReport",
    "SolverError",
    "Factorization",
    "solve_spd",
    "solve_general",
    "solve_singular_meanzero",
    "project_zero_sum",
]


@dataclass
class LinearSolveReport:
    iterations: int
    residual: float
    reused: bool = False


class SolverError(RuntimeError):
    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


def _check_residual(A, x, b, tol, history=None):
    r = float(np.linalg.norm(A @ x - b))
    bound = tol * max(1.0, float(np.linalg.norm(b)))
    if not np.isfinite(r) or r > bound:
        raise SolverError(
            f"linear solve residual {r:.3e} exceeds tolerance {bound:.3e}",
            residual_history=history,
        )
    return r


class Factorization:
    """Reusable sparse LU factorization; immutable and shareable."""

    def __init__(self, A):
        self.matrix = A.tocsr()
        try:
            self._lu = splu(csc_matrix(A))
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc
        self.reused = False

    def solve(self, b: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, LinearSolveReport]:
        x = self._lu.solve(b)
        r = _check_residual(self.matrix, x, b, tol)
        report = LinearSolveReport(iterations=0, residual=r, reused=self.reused)
        self.reused = True
        return x, report


def solve_spd(A, b, tol: float = 1e-10, method: str = "direct"):
    """Solve a symmetric positive definite system.

    ``method`` is "direct" (default) or "cg"; both honor the relative
    residual tolerance tol * max(1, ||b||).
    """
    b = np.asarray(b, dtype=float)
    if method == "direct":
        return Factorization(A).solve(b, tol=tol)
    if method == "cg":
        history: list[float] = []

        def track(xk):
            history.append(float(np.linalg.norm(A @ xk - b)))

        atol = tol * max(1.0, float(np.linalg.norm(b)))
        with np.errstate(divide="ignore", invalid="ignore"):
            x, info = cg(A, b, rtol=0.0, atol=atol, maxiter=10 * A.shape[0], callback=track)
        if info != 0 or not np.all(np.isfinite(x)):
            raise SolverError(f"conjugate gradients failed with info={info}", history)
        r = _check_residual(A, x, b, tol, history)
        return x, LinearSolveReport(iterations=len(history), residual=r)
    raise ValueError(f"unknown method {method!r}")


def solve_general(A, b, tol: float = 1e-10):
    """Direct solve of a square nonsingular (possibly nonsymmetric) system."""
    return Factorization(A).solve(np.asarray(b, dtype=float), tol=tol)


def project_zero_sum(b: np.ndarray) -> np.ndarray:
    """Remove the component violating compatibility with a constant null space."""
    b = np.asarray(b, dtype=float)
    return b - b.sum() / len(b)


class MeanConstrainedFactorization:
    """Bordered (Lagrange multiplier) factorization of a stiffness-type matrix.

    Solves K x = b subject to the mass-weighted mean constraint
    ones @ (M x) = c.  K must be symmetric positive semidefinite with the
    constants as its null space, and b must satisfy ones @ b = 0.
    """

    def __init__(self, K, M):
        self.K = K.tocsr()
        w = np.asarray(M @ np.ones(M.shape[0]))
        self.constraint = w
        bordered = bmat(
            [[self.K, csr_matrix(w[:, None])], [csr_matrix(w[None, :]), None]], format="csc"
        )
        self._lu = splu(bordered)

    def solve(self, b: np.ndarray, mean: float = 0.0, tol: float = 1e-10) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        drift = abs(b.sum())
        if drift > tol * max(1.0, float(np.linalg.norm(b))):
            raise SolverError(
                f"right-hand side incompatible with constant null space (sum {drift:.3e})"
            )
        rhs = np.concatenate([b, [mean]])
        xz = self._lu.solve(rhs)
        x = xz[:-1]
        r = float(np.linalg.norm(self.K @ x - b + xz[-1] * self.constraint))
        bound = tol * max(1.0, float(np.linalg.norm(b)))
        if not np.isfinite(r) or r > bound:
            raise SolverError(f"bordered solve residual {r:.3e} exceeds {bound:.3e}")
        c_err = abs(float(self.constraint @ x) - mean)
        if c_err > tol * max(1.0, abs(mean)):
            raise SolverError(f"mean constraint violated by {c_err:.3e}")
        return x


def solve_singular_meanzero(K, M, b, mean: float = 0.0, tol: float = 1e-10) -> np.ndarray:
    """One-shot mean-constrained solve; see MeanConstrainedFactorization."""
    return MeanConstrainedFactorization(K, M).solve(b, mean=mean, tol=tol)
