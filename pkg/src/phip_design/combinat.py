"""Greedy algorithms for the discrete design problems.

``phi_p`` is nondecreasing and submodular on the pool of experiments (with
``N`` copies of each atom for replicated designs), so the plain greedy is a
``1 - (1 - 1/N)^N`` approximation and lazy evaluation of marginal gains is
exact.  Ties are always broken by the lowest atom index.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .exceptions import AllAtomsNull, NotApplicable, NothingAffordable, TooLarge, ValidationError
from .instance import DesignProblem, IntegerDesign
from .spectra import phi_p

MODES = ("replicated", "binary")


@dataclass(frozen=True)
class GreedyPick:
    index: int
    gain: float
    objective: float


@dataclass(frozen=True)
class GreedyTrace:
    """Picks in order, plus the number of ``phi_p`` evaluations spent."""

    picks: tuple
    evaluations: int

    @property
    def indices(self) -> list[int]:
        return [pk.index for pk in self.picks]

    @property
    def gains(self) -> np.ndarray:
        return np.array([pk.gain for pk in self.picks])

    @property
    def objectives(self) -> np.ndarray:
        return np.array([pk.objective for pk in self.picks])


class _Objective:
    """Counts ``phi_p`` evaluations on one problem."""

    def __init__(self, problem: DesignProblem):
        self.stack = problem.atom_stack
        self.p = problem.p
        self.calls = 0

    def __call__(self, n) -> float:
        self.calls += 1
        return phi_p(n, self.stack, self.p)


def _unit(n, i):
    out = n.copy()
    out[i] += 1
    return out


def greedy(problem: DesignProblem, mode: str = "replicated", lazy: bool = False):
    """Greedy unit increments for a replication-mode problem.

    Parameters
    ----------
    problem : DesignProblem
        Must be in replication mode (budget ``N``).
    mode : {"replicated", "binary"}
        ``binary`` uses each atom at most once and stops early when every
        atom has been picked.
    lazy : bool
        Minoux-style lazy evaluation with stale upper bounds in a priority
        queue. Picks are identical to the plain greedy.

    Returns
    -------
    design : IntegerDesign
    trace : GreedyTrace
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    if problem.is_budgeted:
        raise NotApplicable("greedy needs a replication budget N; use greedy_budgeted_wolsey")
    binary = mode == "binary"
    f = _Objective(problem)
    s, N = problem.s, problem.N
    n = np.zeros(s)
    current = 0.0
    picks = []

    if not lazy:
        for _ in range(N):
            best = None
            for i in range(s):
                if binary and n[i]:
                    continue
                val = f(_unit(n, i))
                gain = val - current
                if best is None or gain > best[1]:
                    best = (i, gain, val)
            if best is None:
                break
            i, gain, current = best
            n[i] += 1
            picks.append(GreedyPick(i, gain, current))
    else:
        # entries (-bound, index, step the bound was computed at, value);
        # an index is in the heap at most once, so values are never compared
        heap = [(-np.inf, i, -1, np.nan) for i in range(s)]
        for step in range(N):
            chosen = None
            while heap:
                negb, i, stamp, val = heapq.heappop(heap)
                if stamp == step:
                    chosen = (i, -negb, val)
                    break
                val = f(_unit(n, i))
                heapq.heappush(heap, (-(val - current), i, step, val))
            if chosen is None:
                break
            i, gain, current = chosen
            n[i] += 1
            picks.append(GreedyPick(i, gain, current))
            if not binary:
                # the next copy of atom i gains at most what this one did
                heapq.heappush(heap, (-gain, i, step, np.nan))
    design = IntegerDesign(n.astype(int), binary=binary)
    return design, GreedyTrace(tuple(picks), f.calls)


def total_curvature(problem: DesignProblem, ground_set: str = "binary", *,
                    return_skipped: bool = False):
    """Total curvature ``max_i 1 - (phi(E) - phi(E - i)) / phi({i})``.

    ``ground_set="binary"`` uses ``E = [s]``; ``"replicated"`` uses the pool
    with ``N`` copies of each atom (``floor(B / c_i)`` copies in budget mode).
    Atoms with ``phi({i}) = 0`` are skipped; pass ``return_skipped=True`` to
    get their indices as a second return value.

    Raises
    ------
    AllAtomsNull
        If every atom scores zero on its own.
    """
    if ground_set not in MODES:
        raise ValidationError(f"ground_set must be one of {MODES}, got {ground_set!r}")
    f = _Objective(problem)
    if ground_set == "binary":
        E = np.ones(problem.s)
    elif problem.is_budgeted:
        E = np.floor(problem.budget_total / problem.costs)
    else:
        E = np.full(problem.s, float(problem.N))
    full = f(E)
    worst, skipped = None, []
    for i in range(problem.s):
        single = f(np.eye(problem.s)[i])
        if single <= 0 or E[i] == 0:
            skipped.append(i)
            continue
        E_minus = E.copy()
        E_minus[i] -= 1
        c_i = 1.0 - (full - f(E_minus)) / single
        worst = c_i if worst is None else max(worst, c_i)
    if worst is None:
        raise AllAtomsNull("every atom has phi_p({i}) = 0")
    c = float(min(max(worst, 0.0), 1.0))
    return (c, skipped) if return_skipped else c


def _cost_benefit_completion(f: _Objective, costs, budget: float, n):
    """Add affordable unit increments by best gain per cost until none fits."""
    n = np.asarray(n, dtype=float).copy()
    current = f(n) if n.any() else 0.0
    slack = 1e-12 * budget
    while True:
        remaining = budget - float(costs @ n)
        best = None
        for i in np.flatnonzero(costs <= remaining + slack):
            val = f(_unit(n, i))
            ratio = (val - current) / costs[i]
            if best is None or ratio > best[1]:
                best = (i, ratio, val)
        if best is None:
            return n, current
        n[best[0]] += 1
        current = best[2]


def _check_budgeted(problem: DesignProblem):
    if not problem.is_budgeted:
        raise NotApplicable("this algorithm needs a budget-mode problem (costs and B)")
    if problem.costs.min() > problem.budget_total:
        raise NothingAffordable("every atom costs more than the budget")


def greedy_budgeted_wolsey(problem: DesignProblem) -> IntegerDesign:
    """Better of the cost-benefit greedy and the best single affordable atom.

    Guarantees ``1 - e^(-beta) ~ 0.357`` of the optimum, ``e^beta = 2 - beta``.
    """
    _check_budgeted(problem)
    f = _Objective(problem)
    costs, B = problem.costs, problem.budget_total
    n_greedy, val_greedy = _cost_benefit_completion(f, costs, B, np.zeros(problem.s))
    best_single, val_single = None, -np.inf
    for i in np.flatnonzero(costs <= B * (1 + 1e-12)):
        val = f(np.eye(problem.s)[i])
        if val > val_single:
            best_single, val_single = i, val
    if val_single > val_greedy:
        n = np.zeros(problem.s, dtype=int)
        n[best_single] = 1
        return IntegerDesign(n)
    return IntegerDesign(n_greedy.astype(int))


def sviridenko_budgeted(problem: DesignProblem, cap_s: int = 25) -> IntegerDesign:
    """Partial enumeration of seeds of up to three increments, each completed greedily.

    Guarantees ``1 - 1/e`` of the optimum.  The search visits
    ``O(s^3)`` seeds, so instances with more than ``cap_s`` atoms are refused.
    """
    _check_budgeted(problem)
    if problem.s > cap_s:
        raise TooLarge(f"s = {problem.s} exceeds the enumeration cap {cap_s}")
    f = _Objective(problem)
    costs, B = problem.costs, problem.budget_total
    slack = 1e-12 * B
    best_n, best_val = None, -np.inf
    for size in range(4):
        for seed in combinations_with_replacement(range(problem.s), size):
            n = np.bincount(np.array(seed, dtype=int), minlength=problem.s).astype(float)
            if costs @ n > B + slack:
                continue
            n, val = _cost_benefit_completion(f, costs, B, n)
            if val > best_val:
                best_n, best_val = n, val
    return IntegerDesign(best_n.astype(int))
