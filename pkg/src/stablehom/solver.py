"""Resolvent solves (lambda M - A) u = M f by preconditioned conjugate gradients.

M is the diagonal mass matrix of the symmetrizing measure and A the jump
generator, so the system is symmetric positive definite.  The preconditioner
is the diagonal lambda m_i + |A_ii|; the measure can be heavy-tailed, which
makes the raw diagonal wildly nonuniform.  All reductions go through numpy
dot products in a fixed order, so identical inputs give identical iterates.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .discrete import MeasureWeights, SparseSymmetricForm
from .errors import ConfigurationError, ConvergenceFailure, DomainError


@dataclass(frozen=True)
class ResolventProblem:
    form: SparseSymmetricForm
    measure: MeasureWeights
    lam: float
    rhs: np.ndarray

    def __post_init__(self):
        if self.lam <= 0:
            raise ConfigurationError(f"lambda must be positive, got {self.lam}")
        if self.measure.grid != self.form.grid:
            raise ConfigurationError("measure and form were assembled on different grids")
        rhs = np.asarray(self.rhs, dtype=float)
        if rhs.size != self.form.grid.size:
            raise DomainError(
                f"rhs has {rhs.size} entries, grid has {self.form.grid.size} nodes"
            )
        object.__setattr__(self, "rhs", rhs.reshape(-1))


@dataclass(frozen=True)
class ResolventSolution:
    u: np.ndarray
    iterations: int
    residual: float
    wall_time: float
    converged: bool


def _apply_system(problem: ResolventProblem, u: np.ndarray) -> np.ndarray:
    return problem.lam * problem.measure.m * u - problem.form.apply_generator(u)


def solve_resolvent(
    problem: ResolventProblem, tol: float = 1e-9, max_iter: int = 10000
) -> ResolventSolution:
    """Conjugate gradients with Jacobi preconditioning.

    The residual is measured relative to ||f||_M in the M^{-1} norm, which
    makes the reported number the relative defect of the weak formulation
    lambda <u, g>_m + E(u, g) = <f, g>_m over all test vectors g.
    """
    if not (0.0 < tol <= 1e-2):
        raise ConfigurationError(f"tol must lie in (0, 1e-2], got {tol}")
    start = time.perf_counter()
    m = problem.measure.m
    f = problem.rhs
    b = m * f
    norm_f = math.sqrt(float(np.dot(m, f * f)))
    if norm_f == 0.0:
        return ResolventSolution(
            u=np.zeros_like(f), iterations=0, residual=0.0,
            wall_time=time.perf_counter() - start, converged=True,
        )
    diag = problem.lam * m + problem.form.row_weight_sums()
    inv_diag = 1.0 / diag
    inv_m = 1.0 / m

    def res_norm(r: np.ndarray) -> float:
        return math.sqrt(float(np.dot(inv_m, r * r))) / norm_f

    u = np.zeros_like(f)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(np.dot(r, z))
    residual = res_norm(r)
    iterations = 0
    while residual > tol:
        if iterations >= max_iter:
            raise ConvergenceFailure(
                f"resolvent CG did not reach tol={tol:g} in {max_iter} iterations "
                f"(residual {residual:.3e})",
                residual=residual,
                iterations=iterations,
            )
        ap = _apply_system(problem, p)
        pap = float(np.dot(p, ap))
        assert pap > 0.0, "negative curvature: system is not positive definite"
        alpha = rz / pap
        u = u + alpha * p
        r = r - alpha * ap
        z = inv_diag * r
        rz_new = float(np.dot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
        iterations += 1
        residual = res_norm(r)
    return ResolventSolution(
        u=u, iterations=iterations, residual=residual,
        wall_time=time.perf_counter() - start, converged=True,
    )


def dense_oracle_solve(problem: ResolventProblem) -> np.ndarray:
    """Direct Cholesky solve of the materialized system; tests only."""
    n = problem.form.grid.size
    if n > 4096:
        raise ConfigurationError(f"dense oracle refused for N = {n} > 4096")
    system = np.diag(problem.lam * problem.measure.m) - problem.form.dense_generator()
    rhs = problem.measure.m * problem.rhs
    return cho_solve(cho_factor(system), rhs)


@dataclass(frozen=True)
class ContractionReport:
    l2_ratio: float
    sup_ratio: float
    energy_rel: float
    min_u: float
    l2_ok: bool
    sup_ok: bool
    energy_ok: bool
    positivity_ok: bool | None
    passed: bool


def resolvent_contraction_check(
    problem: ResolventProblem, solution: ResolventSolution, slack: float = 1e-8
) -> ContractionReport:
    """Markov-resolvent sanity: lambda-contraction in L2(m) and sup norm,
    the energy identity lambda ||u||_m^2 + E(u,u) = <f,u>_m, and positivity
    preservation for nonnegative data."""
    if not solution.converged:
        raise ConfigurationError("contraction check requires a converged solution")
    u, f, lam = solution.u, problem.rhs, problem.lam
    m = problem.measure.m
    norm_u = math.sqrt(float(np.dot(m, u * u)))
    norm_f = math.sqrt(float(np.dot(m, f * f)))
    l2_ratio = lam * norm_u / norm_f if norm_f > 0 else 0.0
    sup_f = float(np.abs(f).max())
    sup_ratio = lam * float(np.abs(u).max()) / sup_f if sup_f > 0 else 0.0
    pairing = float(np.dot(m, f * u))
    identity_gap = lam * norm_u**2 + problem.form.energy(u, u) - pairing
    scale = max(abs(pairing), lam * norm_u**2, 1e-300)
    energy_rel = abs(identity_gap) / scale
    l2_ok = l2_ratio <= 1.0 + slack
    sup_ok = sup_ratio <= 1.0 + slack
    energy_ok = energy_rel <= 1e-6
    min_u = float(u.min())
    positivity_ok = None
    if (f >= 0.0).all():
        positivity_ok = min_u >= -slack * max(sup_f, 1.0)
    passed = l2_ok and sup_ok and energy_ok and (positivity_ok is not False)
    return ContractionReport(
        l2_ratio=l2_ratio,
        sup_ratio=sup_ratio,
        energy_rel=energy_rel,
        min_u=min_u,
        l2_ok=l2_ok,
        sup_ok=sup_ok,
        energy_ok=energy_ok,
        positivity_ok=positivity_ok,
        passed=passed,
    )
