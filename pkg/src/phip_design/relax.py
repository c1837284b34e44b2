"""Continuous relaxation solved by a multiplicative weight algorithm.

The relaxation maximizes ``phi_p(w)`` (log det at ``p = 0``) over
``w >= 0`` with ``sum_i c_i w_i <= B`` (``c = 1``, ``B = N`` for replicated
designs).  Working in the spend variables ``z_i = c_i w_i``, which sum to
``B``, the update is

    z_i <- B * z_i * h_i^lam / sum_k z_k h_k^lam,   h_i = trace(M^(p-1) M_i) / c_i

and the optimality certificate is the general equivalence theorem:
``w`` is optimal iff ``B h_i <= phi_p(w)`` for every ``i`` (with ``phi_0 = m``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DidNotConverge, SingularInformationMatrix, SingularIterate, ValidationError
from .instance import DesignProblem, WeightVector
from .spectra import eig_psd, gradient_traces, info_matrix, kiefer_phi

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 100_000
ACTIVE_TOL = 1e-12


@dataclass(frozen=True)
class RelaxationCertificate:
    """Solver output: weights, objective and the equivalence-theorem gap."""

    weights: WeightVector
    objective: float
    gap: float
    iterations: int
    converged: bool
    tol: float
    criterion: float = float("nan")

    @property
    def w(self) -> np.ndarray:
        return self.weights.w

    def to_dict(self) -> dict:
        return {
            "weights": [float(x) for x in self.weights.w],
            "budget_used": self.weights.budget_used,
            "objective": self.objective,
            "criterion": self.criterion,
            "gap": self.gap,
            "tol": self.tol,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _objective(spectrum, p: float) -> float:
    # phi_0 is the rank, which equals m for every nonsingular iterate
    return spectrum.power_sum(p) if p > 0 else float(spectrum.dim)


def stationarity_ratios(problem: DesignProblem, weights) -> np.ndarray:
    """``(B / c_i) trace(M_F(w)^(p-1) M_i) / phi_p(w)`` for every atom.

    All ratios are ``<= 1`` exactly at an optimum, with equality on the support.

    Raises
    ------
    SingularInformationMatrix
        If ``M_F(w)`` is singular and ``p < 1``.
    """
    w = np.asarray(weights, dtype=float)
    M = info_matrix(w, problem.atom_stack)
    spectrum = eig_psd(M)
    p = problem.p
    if p < 1 and spectrum.effective_rank < spectrum.dim:
        raise SingularInformationMatrix(
            f"M_F(w) has rank {spectrum.effective_rank} < {spectrum.dim}")
    phi = _objective(spectrum, p)
    g = gradient_traces(M, p, problem.atom_stack)
    return problem.budget_total * g / (problem.costs * phi)


def equivalence_gap(problem: DesignProblem, weights) -> float:
    """``max_i ratio_i - 1``; a value ``<= 0`` certifies global optimality."""
    return float(np.max(stationarity_ratios(problem, weights)) - 1.0)


def _closed_form_linear(problem: DesignProblem, tol: float) -> RelaxationCertificate:
    # p = 1: phi is linear, all budget goes to the best trace per unit cost
    value = np.trace(problem.atom_stack, axis1=1, axis2=2) / problem.costs
    j = int(np.argmax(value))
    w = np.zeros(problem.s)
    w[j] = problem.budget_total / problem.costs[j]
    weights = WeightVector.for_problem(w, problem)
    gap = equivalence_gap(problem, w)
    M = info_matrix(w, problem.atom_stack)
    return RelaxationCertificate(weights, float(problem.budget_total * value[j]), gap, 0,
                                 gap <= tol, tol, kiefer_phi(M, 1.0))


def solve_continuous(problem: DesignProblem, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER, *, exponent: float = 1.0,
                     raise_on_failure: bool = False) -> RelaxationCertificate:
    """Solve the continuous relaxation and certify the result.

    Parameters
    ----------
    problem : DesignProblem
        ``M_F(1)`` must be nonsingular; see ``project_if_rank_deficient``.
    tol : float
        Target equivalence gap.
    max_iter : int
        Iteration cap. Hitting it returns a certificate with
        ``converged=False`` (or raises ``DidNotConverge`` when
        ``raise_on_failure`` is set).
    exponent : float
        Update exponent ``lam`` in (0, 1].

    Raises
    ------
    SingularInformationMatrix
        If ``M_F(1)`` is singular.
    SingularIterate
        If an iterate loses rank numerically.
    """
    if not 0 < exponent <= 1:
        raise ValidationError(f"update exponent must lie in (0, 1], got {exponent}")
    if tol <= 0 or max_iter < 0:
        raise ValidationError("need tol > 0 and max_iter >= 0")
    p = problem.p
    if p == 1.0:
        return _closed_form_linear(problem, tol)

    stack, costs, B = problem.atom_stack, problem.costs, problem.budget_total
    full = eig_psd(stack.sum(axis=0))
    if full.effective_rank < full.dim:
        raise SingularInformationMatrix(
            f"sum of atoms has rank {full.effective_rank} < {full.dim}; project the problem first")

    z = np.full(problem.s, B / problem.s)
    gap = np.inf
    it = 0
    while True:
        w = z / costs
        M = info_matrix(w, stack)
        spectrum = eig_psd(M)
        if spectrum.effective_rank < spectrum.dim:
            raise SingularIterate(
                f"iterate {it} lost rank ({spectrum.effective_rank} < {spectrum.dim})")
        phi = _objective(spectrum, p)
        h = gradient_traces(M, p, stack) / costs
        gap = B * float(np.max(h)) / phi - 1.0
        if gap <= tol or it >= max_iter:
            break
        t = z * h**exponent
        z = B * t / t.sum()
        it += 1

    z = np.where(z < ACTIVE_TOL * B, 0.0, z)
    w = z / costs
    gap = equivalence_gap(problem, w)
    spectrum = eig_psd(info_matrix(w, stack))
    converged = gap <= tol
    cert = RelaxationCertificate(WeightVector.for_problem(w, problem), spectrum.power_sum(p), gap,
                                 it, converged, tol, kiefer_phi(info_matrix(w, stack), p))
    if not converged:
        logger.warning("multiplicative algorithm stopped at gap %.3g after %d iterations", gap, it)
        if raise_on_failure:
            raise DidNotConverge(f"gap {gap:.3g} > tol {tol:g} after {it} iterations", cert)
    return cert
