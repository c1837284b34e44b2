"""Approximation-factor bounds and efficiency certificates.

*Posterior* bounds depend on the relaxation optimum ``w*`` and bound the
efficiency ``phi_p(n) / phi_p(w*)`` of any integer design ``n``.  *Prior*
bounds only depend on ``(p, N, s)``.  Greedy factors bound
``phi_p(greedy) / phi_p(n*)`` against the integer optimum ``n*``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import BadSum, DimensionMismatch, NotSorted, ValidationError
from .instance import DesignProblem, IntegerDesign
from .relax import RelaxationCertificate
from .rounding import RoundingResult, pow0, surrogate_value
from .spectra import phi_p


def posterior_binary(S, w_star, N: int, p: float) -> float:
    """``(1/N) sum_(i in S) (w*_i)^(1-p)``.

    ``S`` is a boolean mask, an ``IntegerDesign`` or a sequence of indices.
    """
    w = np.asarray(w_star, dtype=float)
    if isinstance(S, IntegerDesign):
        S = S.n > 0
    S = np.asarray(S)
    idx = np.flatnonzero(S) if S.dtype == bool else np.unique(S.astype(int))
    return float(np.sum(pow0(w[idx], 1.0 - p)) / N)


def posterior_replicated(n, w_star, N: int, p: float) -> float:
    """``(1/N) sum_i n_i^p (w*_i)^(1-p)``; ``n`` need not sum to ``N``."""
    return surrogate_value(n, w_star, p) / N


def posterior_budgeted(n, w_star, costs, B: float, p: float) -> float:
    """``(1/B) sum_i c_i n_i^p (w*_i)^(1-p)``."""
    return surrogate_value(n, w_star, p, costs) / B


def prior_factor_replicated(p: float, N: int, s: int) -> float:
    """Prior factor ``F(p, N, s)`` for incremental rounding of ``w*``.

    ``(N/s)^(1-p)`` when that is at most ``1/(2-p)``, else
    ``1 - (s/N)(1-p)(1/(2-p))^((2-p)/(1-p))``; equal to 1 at ``p = 1``.
    """
    if N < 1 or s < 1:
        raise ValidationError("need N, s >= 1")
    return prior_factor_ratio(p, N / s)


def prior_factor_ratio(p: float, ratio: float) -> float:
    """``F`` as a function of ``p`` and the ratio ``N/s > 0``."""
    p = float(p)
    if not 0 <= p <= 1 or not ratio > 0:
        raise ValidationError("need p in [0, 1] and N/s > 0")
    if p == 1.0:
        return 1.0
    first = ratio ** (1.0 - p)
    if first <= 1.0 / (2.0 - p):
        return first
    return _second_branch(p, ratio)


def _second_branch(p: float, x: float) -> float:
    return 1.0 - (1.0 - p) / x * (1.0 / (2.0 - p)) ** ((2.0 - p) / (1.0 - p))


def prior_factor_binary(p: float, N: int, s: int):
    """``(N/s)^(1-p)`` for the top-``N`` binary design when
    ``p <= 1 - ln N / ln s``; ``None`` when the condition fails.
    """
    if not 1 <= N <= s:
        raise ValidationError(f"need 1 <= N <= s, got N={N}, s={s}")
    if N == s:
        applicable = p <= 0
    else:
        applicable = p <= 1.0 - math.log(N) / math.log(s) + 1e-12
    return (N / s) ** (1.0 - p) if applicable else None


def greedy_factor(N: int, c: float | None = None) -> float:
    """``1 - (1 - 1/N)^N``, or ``(1/c)(1 - (1 - c/N)^N)`` given the curvature ``c``."""
    if N < 1:
        raise ValidationError("N must be at least 1")
    if c is None:
        c = 1.0
    if not 0 <= c <= 1:
        raise ValidationError(f"curvature must lie in [0, 1], got {c}")
    if c == 0:
        return 1.0
    # 1 - (1 - c/N)^N, written to stay accurate for large N
    return float(-math.expm1(N * math.log1p(-c / N)) / c) if c < N else 1.0 / c


def wolsey_beta(tol: float = 1e-12) -> float:
    """Root of ``e^x = 2 - x`` by bisection on ``[0, 1]``."""
    lo, hi = 0.0, 1.0
    while hi - lo > tol * 1e-3:
        mid = 0.5 * (lo + hi)
        if math.exp(mid) - 2.0 + mid > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 4 * math.ulp(mid):
            break
    return 0.5 * (lo + hi)


def wolsey_factor() -> float:
    return 1.0 - math.exp(-wolsey_beta())


SVIRIDENKO_FACTOR = 1.0 - math.exp(-1.0)


def apportionment_factor(p: float, N: int, support: int) -> float:
    """``(1 - s'/N)^p`` with ``s'`` the support size of ``w*`` (``0^0 = 0``)."""
    if N < support:
        raise ValidationError("apportionment needs N >= support size")
    return float(pow0(np.array([1.0 - support / N]), p)[0])


def lemma_floor_sides(w_sorted, r: int, s: int, p: float):
    """Both sides of ``(1/r) sum_(i<=r) w_i^(1-p) >= (r/s)^(1-p)``."""
    w = np.asarray(w_sorted, dtype=float)
    if w.shape != (s,):
        raise DimensionMismatch(f"expected {s} weights, got shape {w.shape}")
    if int(r) != r or not 1 <= r <= s:
        raise ValidationError(f"need an integer 1 <= r <= s, got {r}")
    if np.any(w < 0):
        raise ValidationError("weights must be nonnegative")
    if np.any(np.diff(w) > 0):
        raise NotSorted("weights must be sorted in descending order")
    if abs(w.sum() - r) > 1e-9 * r:
        raise BadSum(f"weights sum to {w.sum()!r}, expected {r}")
    lhs = float(np.sum(pow0(w[: int(r)], 1.0 - p)) / r)
    return lhs, (r / s) ** (1.0 - p)


def lemma_condition(w_sorted, r: int, s: int, p: float, condition: str) -> bool:
    """Whether ``capped`` (every ``w_i <= 1``) or ``smallp`` (``p <= 1 - ln r / ln s``) holds."""
    if condition == "capped":
        return bool(np.all(np.asarray(w_sorted) <= 1.0 + 1e-12))
    if condition == "smallp":
        if r == s:
            return p <= 0
        return p <= 1.0 - math.log(r) / math.log(s) + 1e-12
    raise ValidationError(f"condition must be 'capped' or 'smallp', got {condition!r}")


def lemma_floor_bound(w_sorted, r: int, s: int, p: float, condition: str = "capped",
                      rtol: float = 1e-12) -> bool:
    """Evaluate the floor inequality for sorted weights summing to ``r``.

    ``condition`` names the hypothesis under which the inequality is claimed;
    it is validated but the returned value is the truth of the inequality
    itself, whether or not the hypothesis holds.
    """
    lemma_condition(w_sorted, r, s, p, condition)
    lhs, rhs = lemma_floor_sides(w_sorted, r, s, p)
    return lhs >= rhs * (1.0 - rtol)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EfficiencyCertificate:
    """A design with its efficiency against the relaxation and the bounds that apply."""

    method: str
    design: IntegerDesign
    relax_objective: float
    design_objective: float
    ratio: float
    posterior_bound: float
    prior_bound: float | None
    greedy_bound: float | None
    relax_gap: float

    @property
    def slack(self) -> float:
        """Relative allowance ``gap + 1e-9`` for bounds stated at the exact optimizer."""
        return max(self.relax_gap, 0.0) + 1e-9

    def is_consistent(self) -> bool:
        """``ratio <= 1 + gap`` and every applicable bound is at most ``ratio + 10 gap + 1e-9``."""
        gap = max(self.relax_gap, 0.0)
        if not self.ratio <= 1.0 + gap + 1e-9:
            return False
        bounds = [self.posterior_bound, self.prior_bound]
        return all(b <= self.ratio + 10.0 * gap + 1e-9 for b in bounds if b is not None)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["design"] = self.design.to_list()
        d["binary"] = self.design.binary
        return d


def build_certificate(problem: DesignProblem, design, relax: RelaxationCertificate,
                      method: str) -> EfficiencyCertificate:
    """Evaluate ``design`` against the relaxation and attach every applicable bound.

    ``method`` selects the prior and greedy bounds: ``round`` (factor F),
    ``topn``, ``apportion``, ``dp``, ``greedy``/``greedy-binary``, ``wolsey``
    or ``sviridenko``.
    """
    if isinstance(design, RoundingResult):
        design = design.design
    if not isinstance(design, IntegerDesign):
        design = IntegerDesign(np.asarray(design))
    w = relax.weights.w
    if len(design) != problem.s or len(w) != problem.s:
        raise DimensionMismatch("design, weights and problem disagree on s")
    p, stack = problem.p, problem.atom_stack
    relax_obj = phi_p(w, stack, p)
    design_obj = phi_p(design.n, stack, p)
    ratio = design_obj / relax_obj

    if problem.is_budgeted:
        post = posterior_budgeted(design.n, w, problem.costs, problem.budget_total, p)
    elif design.binary:
        post = posterior_binary(design.n.astype(bool), w, problem.N, p)
    else:
        post = posterior_replicated(design.n, w, problem.N, p)

    prior = None
    greedy_bound = None
    if method == "round":
        prior = prior_factor_replicated(p, problem.N, problem.s)
    elif method == "topn":
        prior = prior_factor_binary(p, problem.N, problem.s)
    elif method == "apportion":
        prior = apportionment_factor(p, problem.N, int(np.count_nonzero(w > 0)))
    elif method in ("greedy", "greedy-binary", "greedy-lazy"):
        greedy_bound = greedy_factor(problem.N)
    elif method == "wolsey":
        greedy_bound = wolsey_factor()
    elif method == "sviridenko":
        greedy_bound = SVIRIDENKO_FACTOR
    elif method != "dp":
        raise ValidationError(f"unknown method {method!r}")
    return EfficiencyCertificate(method, design, relax_obj, design_obj, ratio, post,
                                 prior, greedy_bound, relax.gap)
