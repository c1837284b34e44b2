"""Rounding of relaxation weights into integer designs.

All rounders target the separable surrogate

    sum_i c_i * n_i^p * w_i^(1-p)        (c = 1 outside budget mode)

with the convention ``0^0 = 0``: an atom with ``n_i = 0`` or ``w_i = 0``
contributes nothing, even at ``p = 0`` or ``p = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .exceptions import BadBudget, BudgetScaleOverflow, BudgetTooSmall, DimensionMismatch, ValidationError
from .instance import IntegerDesign

SUM_TOL = 1e-9
DP_STATE_CAP = 10**6


class RoundingMethod(str, Enum):
    INCREMENTAL = "incremental"
    TOP_N = "topn"
    APPORTIONMENT = "apportionment"
    DP = "dp"


@dataclass(frozen=True)
class RoundingResult:
    design: IntegerDesign
    posterior_objective: float
    method: RoundingMethod


def pow0(x, e):
    """``x**e`` elementwise for ``x >= 0`` with ``0**e = 0`` for every ``e``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] ** e
    return out


def surrogate_value(n, w, p: float, costs=None) -> float:
    """``sum_i c_i n_i^p w_i^(1-p)`` with ``0^0 = 0``."""
    n = np.asarray(n, dtype=float)
    w = np.asarray(w, dtype=float)
    if n.shape != w.shape:
        raise DimensionMismatch(f"design shape {n.shape} vs weights shape {w.shape}")
    terms = pow0(n, p) * pow0(w, 1.0 - p)
    if costs is not None:
        terms = np.asarray(costs, dtype=float) * terms
    return float(np.sum(terms))


def _weights(w) -> np.ndarray:
    w = np.array(w, dtype=float).ravel()
    if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValidationError("weights must be a non-empty vector of finite nonnegative numbers")
    return w


def _normalized(w, N: int | None):
    """Scale ``w`` so it sums to the integer ``N`` exactly.

    Without ``N`` the sum must already be a positive integer (within
    ``SUM_TOL``).  With ``N`` the sum may fall short of ``N``, which happens
    after tiny relaxation weights are zeroed.
    """
    w = _weights(w)
    total = float(w.sum())
    if N is None:
        N = round(total)
        if N < 1 or abs(total - N) > SUM_TOL * max(1.0, N):
            raise BadBudget(f"weights sum to {total!r}, not a positive integer")
    else:
        if int(N) != N or N < 1:
            raise BadBudget(f"N must be a positive integer, got {N!r}")
        N = int(N)
        if total <= 0 or total > N * (1 + SUM_TOL):
            raise BadBudget(f"weights sum to {total!r}, cannot be scaled up to N = {N}")
    return w * (N / total), N


def incremental_rounding(w, p: float, N: int | None = None) -> RoundingResult:
    """Greedy unit increments on the sorted weights.

    Starting from one unit on the largest weight, each of the remaining
    ``N - 1`` units goes to the atom maximizing
    ``((n_i + 1)^p - n_i^p) * w_i^(1-p)``, lowest sorted position on ties.
    The result maximizes ``sum_i n_i^p w_i^(1-p)`` over ``sum_i n_i = N``.
    Since the optimal counts are nonincreasing along the sorted weights,
    only positions ``i = 1`` or ``n_i + 1 <= n_(i-1)`` are examined.
    """
    # scaling w by a constant scales every increment alike, so the caller's
    # weights are used as given and only their sum is checked
    w = _weights(w)
    _, N = _normalized(w, N)
    order = np.argsort(-w, kind="stable")
    a = pow0(w[order], 1.0 - p)
    ns = np.zeros(len(w))
    ns[0] = 1
    for _ in range(N - 1):
        eligible = np.empty(len(ns), dtype=bool)
        eligible[0] = True
        eligible[1:] = ns[1:] + 1 <= ns[:-1]
        inc = (pow0(ns + 1, p) - pow0(ns, p)) * a
        inc[~eligible] = -np.inf
        ns[int(np.argmax(inc))] += 1
    n = np.zeros(len(w), dtype=int)
    n[order] = ns.astype(int)
    return RoundingResult(IntegerDesign(n), surrogate_value(n, w, p), RoundingMethod.INCREMENTAL)


def top_n_binary(w, N: int, p: float | None = None) -> RoundingResult:
    """Binary design on the ``N`` largest weights (lowest index first on ties).

    ``posterior_objective`` is ``sum_(i in S) w_i^(1-p)``, or NaN when ``p`` is
    not given.
    """
    w = _weights(w)
    if int(N) != N or not 1 <= N <= len(w):
        raise ValidationError(f"need 1 <= N <= s = {len(w)}, got N = {N!r}")
    chosen = np.argsort(-w, kind="stable")[: int(N)]
    n = np.zeros(len(w), dtype=int)
    n[chosen] = 1
    value = surrogate_value(n, w, p) if p is not None else float("nan")
    return RoundingResult(IntegerDesign(n, binary=True), value, RoundingMethod.TOP_N)


def apportionment(w, N: int | None = None, p: float | None = None) -> RoundingResult:
    """Efficient apportionment of weights summing to ``N``.

    On the support (size ``s'``) start from ``ceil((N - s'/2) w_i / N)``, then
    increment ``argmin n_i / w_i`` while the total is short of ``N``, or
    decrement ``argmax (n_i - 1) / w_i`` while it exceeds ``N``.  Every
    supported atom keeps at least one unit.

    Raises
    ------
    BudgetTooSmall
        If ``N`` is smaller than the support size.
    """
    w, N = _normalized(w, N)
    support = np.flatnonzero(w > 0)
    k = len(support)
    if N < k:
        raise BudgetTooSmall(f"N = {N} is smaller than the support size {k}")
    ws = w[support]
    # a hair below the exact value so float noise cannot push an integer up
    ns = np.ceil((N - k / 2) * ws / N - 1e-9).astype(int)
    while ns.sum() < N:
        ns[int(np.argmin(ns / ws))] += 1
    while ns.sum() > N:
        ns[int(np.argmax((ns - 1) / ws))] -= 1
    n = np.zeros(len(w), dtype=int)
    n[support] = ns
    value = surrogate_value(n, w, p) if p is not None else float("nan")
    return RoundingResult(IntegerDesign(n), value, RoundingMethod.APPORTIONMENT)


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    x = float(x)
    if not math.isfinite(x):
        raise ValidationError(f"cost {x} is not a finite decimal")
    return Fraction(repr(x))


def budgeted_dp(w, costs, B, p: float, max_rep=None, state_cap: int = DP_STATE_CAP) -> RoundingResult:
    """Maximize ``sum_i c_i n_i^p w_i^(1-p)`` subject to ``sum_i c_i n_i <= B``.

    Costs and budget are read as exact decimals and scaled to integers by
    their common denominator; the dynamic program runs over
    (atom prefix, residual integer budget).  ``max_rep`` caps each ``n_i``
    (default ``floor(B / c_i)``).  Ties prefer fewer units on earlier atoms.

    Raises
    ------
    BudgetScaleOverflow
        If ``s * (scaled B + 1)`` exceeds ``state_cap``.
    """
    w = _weights(w)
    s = len(w)
    cf = [_as_fraction(c) for c in np.ravel(costs)] if not isinstance(costs, (list, tuple)) \
        else [_as_fraction(c) for c in costs]
    if len(cf) != s:
        raise DimensionMismatch(f"{len(cf)} costs for {s} weights")
    if any(c <= 0 for c in cf):
        raise ValidationError("costs must be positive")
    Bf = _as_fraction(B)
    scale = math.lcm(*(c.denominator for c in cf), Bf.denominator)
    ci = [int(c * scale) for c in cf]
    Bi = int(Bf * scale)
    if s * (Bi + 1) > state_cap:
        raise BudgetScaleOverflow(f"DP needs {s * (Bi + 1)} states, cap is {state_cap}")
    if max_rep is None:
        caps = [Bi // c for c in ci]
    else:
        caps = list(np.broadcast_to(np.asarray(max_rep, dtype=int), (s,)))
        caps = [min(int(r), Bi // c) for r, c in zip(caps, ci)]

    cfloat = np.array([float(c) for c in cf])
    a = pow0(w, 1.0 - p)
    value = np.zeros(Bi + 1)  # best value with the atoms seen so far, spending <= b
    choice = np.zeros((s, Bi + 1), dtype=int)
    for j in range(s):
        best = value.copy()
        pick = np.zeros(Bi + 1, dtype=int)
        for n in range(1, caps[j] + 1):
            spend = n * ci[j]
            cand = np.full(Bi + 1, -np.inf)
            cand[spend:] = value[: Bi + 1 - spend] + cfloat[j] * float(n) ** p * a[j]
            better = cand > best
            best[better] = cand[better]
            pick[better] = n
        value = best
        choice[j] = pick
    n = np.zeros(s, dtype=int)
    b = Bi
    for j in range(s - 1, -1, -1):
        n[j] = choice[j, b]
        b -= n[j] * ci[j]
    return RoundingResult(IntegerDesign(n), surrogate_value(n, w, p, cfloat), RoundingMethod.DP)
