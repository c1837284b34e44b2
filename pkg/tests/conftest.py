"""Shared helpers: random PSD matrices and brute-force enumeration oracles."""

from itertools import combinations_with_replacement, product

import numpy as np
import pytest

from phip_design import generate, phi_p


def random_psd(rng, m, rank=None, scale=1.0):
    """``A^T A`` with ``A`` Gaussian of shape ``(rank, m)``."""
    A = rng.standard_normal((m if rank is None else rank, m))
    return scale * A.T @ A


def compositions(s, N):
    """All ``n in N^s`` with ``sum(n) = N``."""
    for combo in combinations_with_replacement(range(s), N):
        yield np.bincount(np.array(combo, dtype=int), minlength=s)


def budget_designs(costs, B):
    """All ``n >= 0`` with ``costs @ n <= B`` (small instances only)."""
    costs = np.asarray(costs, dtype=float)
    caps = [int(np.floor(B / c + 1e-12)) for c in costs]
    for n in product(*(range(k + 1) for k in caps)):
        n = np.array(n)
        if costs @ n <= B + 1e-12:
            yield n


def brute_force_optimum(problem):
    """Best ``phi_p`` over every feasible integer design."""
    if problem.is_budgeted:
        pool = budget_designs(problem.costs, problem.budget_total)
    else:
        pool = compositions(problem.s, problem.N)
    return max(phi_p(n, problem.atom_stack, problem.p) for n in pool)


def random_suite(count, seed=0, ps=(0.0, 0.25, 0.5, 0.75, 1.0), s_range=(2, 8), N_range=(1, 4)):
    """Deterministic mix of random-psd, rank-one and coverage instances."""
    rng = np.random.default_rng(seed)
    kinds = ("random-psd", "rank-one", "coverage")
    out = []
    for k in range(count):
        kind = kinds[k % 3]
        m = int(rng.integers(2, 5))
        params = {"m": m, "s": int(rng.integers(*s_range, endpoint=True)),
                  "N": int(rng.integers(*N_range, endpoint=True)), "p": float(ps[k % len(ps)])}
        if kind == "random-psd":
            params["rows"] = int(rng.integers(1, 3))
        out.append(generate(kind, params, seed=int(rng.integers(2**31))))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# acceptance bookkeeping: one PASS/FAIL line per criterion in the summary

ACCEPTANCE: dict = {}


class record:
    """Context manager marking a sub-check of acceptance criterion ``number``."""

    def __init__(self, number, title, check=""):
        self.number, self.title, self.check = number, title, check

    def __enter__(self):
        ACCEPTANCE.setdefault(self.number, {"title": self.title, "failed": [], "passed": []})
        return self

    def __exit__(self, exc_type, exc, tb):
        entry = ACCEPTANCE[self.number]
        if exc_type is None:
            entry["passed"].append(self.check)
        else:
            entry["failed"].append(f"{self.check}: {str(exc).splitlines()[0] if str(exc) else exc_type.__name__}")
        line = f"criterion {self.number:2d} [{self.check}] {'PASS' if exc_type is None else 'FAIL'}"
        print(line)
        return False


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        entry = ACCEPTANCE[number]
        status = "FAIL" if entry["failed"] else "PASS"
        tr.write_line(f"criterion {number:2d}: {status}  {entry['title']}")
        for msg in entry["failed"]:
            tr.write_line(f"    failed sub-check {msg}")
