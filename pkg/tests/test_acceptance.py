"""Acceptance suite: ten criteria, each reported as one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py``; the summary section
"acceptance criteria" lists the verdicts.  Bound comparisons carry the slack
``10 * gap + 1e-9`` of an approximate relaxation optimum.
"""

import math
from itertools import combinations

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from phip_design import (
    apportionment,
    as_problem,
    generate,
    greedy,
    greedy_budgeted_wolsey,
    incremental_rounding,
    phi_p,
    project_if_rank_deficient,
    solve_continuous,
    sviridenko_budgeted,
    top_n_binary,
)
from phip_design.bounds import (
    greedy_factor,
    lemma_floor_sides,
    posterior_binary,
    posterior_budgeted,
    posterior_replicated,
    prior_factor_ratio,
    prior_factor_replicated,
    wolsey_beta,
    wolsey_factor,
)
from phip_design.rounding import surrogate_value
from phip_design.spectra import (
    eig_psd,
    frechet_derivative,
    gradient_trace,
    submodularity_slack,
    trace_power,
)

from conftest import brute_force_optimum, compositions, random_psd, random_suite, record

PS = (0.0, 0.25, 0.5, 0.75, 1.0)


def _solve(problem, tol=1e-6):
    projected, _ = project_if_rank_deficient(problem)
    return solve_continuous(projected, tol)


# 1 -------------------------------------------------------------------------

def test_criterion_1_submodularity_matrix_form():
    with record(1, "submodularity inequality", "1000 PSD triples x 10 exponents"):
        rng = np.random.default_rng(1)
        worst = np.inf
        for _ in range(1000):
            m = int(rng.integers(1, 6))
            X, Y, Z = (random_psd(rng, m, rank=int(rng.integers(1, m + 1)),
                                  scale=float(rng.choice([1e-2, 1.0, 1e2]))) for _ in range(3))
            for p in np.round(np.arange(0.1, 1.01, 0.1), 1):
                rel = submodularity_slack(X, Y, Z, p) / trace_power(X + Y + Z, p)
                worst = min(worst, rel)
        assert worst >= -1e-9, f"relative slack {worst:.3g}"


def test_criterion_1_submodularity_set_form():
    with record(1, "submodularity inequality", "200 set pairs"):
        rng = np.random.default_rng(2)
        for k in range(200):
            s, m = 6, int(rng.integers(2, 5))
            atoms = np.array([random_psd(rng, m, rank=int(rng.integers(1, m + 1))) for _ in range(s)])
            p = float(rng.choice([0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0]))
            if k % 2:
                # binary sets
                I, J = (rng.random(s) < 0.5).astype(float), (rng.random(s) < 0.5).astype(float)
            else:
                # multisets: the lattice of replicated designs
                I, J = rng.integers(0, 3, s).astype(float), rng.integers(0, 3, s).astype(float)
            F = lambda n: phi_p(n, atoms, p)
            lhs = F(I) + F(J)
            rhs = F(np.maximum(I, J)) + F(np.minimum(I, J))
            assert lhs >= rhs - 1e-9 * max(1.0, rhs), (k, p, lhs, rhs)


# 2 -------------------------------------------------------------------------

def test_criterion_2_greedy_guarantee():
    with record(2, "greedy guarantee", "50 instances vs enumeration, lazy = naive"):
        suite = random_suite(50, seed=20, ps=PS, s_range=(2, 8), N_range=(1, 4))
        for problem in suite:
            naive, t_naive = greedy(problem, lazy=False)
            lazy, t_lazy = greedy(problem, lazy=True)
            assert t_naive.indices == t_lazy.indices, problem.label
            assert_array_equal(naive.n, lazy.n)
            opt = brute_force_optimum(problem)
            value = problem.phi(naive.n)
            assert value >= greedy_factor(problem.N) * opt * (1 - 1e-12), (problem.label, value, opt)
            if problem.p == 1.0:
                assert value == pytest.approx(opt, rel=1e-12)


# 3 -------------------------------------------------------------------------

def test_criterion_3_relaxation_suite():
    with record(3, "relaxation certificate", "gap on the random suite"):
        for problem in random_suite(50, seed=30, ps=PS):
            cert = _solve(problem)
            assert cert.gap <= 1e-6, (problem.label, cert.gap)


def test_criterion_3_symmetric_pair():
    with record(3, "relaxation certificate", "symmetric two-atom instance"):
        atoms = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
        for N in (1, 2, 5):
            for p in PS[:-1]:
                cert = solve_continuous(as_problem(atoms, p, N=N))
                assert np.max(np.abs(cert.w - 0.5 * N)) <= 1e-6, (N, p, cert.w)


def test_criterion_3_random_probes():
    with record(3, "relaxation certificate", "1000 feasible probes"):
        rng = np.random.default_rng(3)
        for seed, p in enumerate(PS):
            problem = generate("random-psd", {"m": 3, "s": 6, "N": 3, "p": p}, seed=seed)
            cert = solve_continuous(problem)
            stack = problem.atom_stack
            z = rng.dirichlet(np.full(problem.s, 0.5), size=1000) * problem.N

            # the relaxation maximizes log det at p = 0 and trace M^p otherwise
            def value(w):
                if p == 0:
                    return eig_psd(np.einsum("i,ijk->jk", w, stack)).log_pseudo_det()
                return phi_p(w, stack, p)

            best = value(cert.w)
            for w in z:
                assert value(w) <= best + 1e-6 * abs(best), (p, value(w), best)


# 4 -------------------------------------------------------------------------

def test_criterion_4_worked_example():
    with record(4, "incremental rounding surrogate optimality", "worked example"):
        res = incremental_rounding([1.5, 0.5], 0.5, 2)
        assert_array_equal(res.design.n, [1, 1])
        assert abs(res.posterior_objective - (math.sqrt(1.5) + math.sqrt(0.5))) <= 1e-9
        assert abs(res.posterior_objective - 1.93185) <= 5e-6


def test_criterion_4_exact_enumeration():
    with record(4, "incremental rounding surrogate optimality", "exact match on enumerable instances"):
        rng = np.random.default_rng(4)
        checked = 0
        for s in range(1, 9):
            for N in range(1, 9):
                if math.comb(s + N - 1, N) > 10**5:
                    continue
                for p in PS:
                    for k in range(2):
                        alpha = 0.3 if k else 2.0
                        w = rng.dirichlet(np.full(s, alpha)) * N
                        res = incremental_rounding(w, p, N)
                        best = max(surrogate_value(n, w, p) for n in compositions(s, N))
                        assert res.posterior_objective == best, (s, N, p, res.design.n)
                        checked += 1
        # weights taken from solved relaxations
        for problem in random_suite(15, seed=40, ps=PS[:-1], N_range=(2, 5)):
            cert = _solve(problem)
            res = incremental_rounding(cert.w, problem.p, problem.N)
            best = max(surrogate_value(n, cert.w, problem.p) for n in compositions(problem.s, problem.N))
            assert res.posterior_objective == best, problem.label
            checked += 1
        assert checked > 600


# 5 -------------------------------------------------------------------------

def test_criterion_5_posterior_bounds():
    with record(5, "posterior bounds", "50 instances x 20 designs"):
        rng = np.random.default_rng(5)
        suite = random_suite(40, seed=50, ps=PS, N_range=(1, 5))
        suite += [generate(kind, {"m": 3, "s": 5, "p": float(PS[k % 5]), "budget": 4.0}, seed=k)
                  for k, kind in enumerate(["random-psd", "rank-one"] * 5)]
        for problem in suite:
            cert = _solve(problem)
            w, p, stack = cert.w, problem.p, problem.atom_stack
            relax_value = phi_p(w, stack, p)
            slack = 10 * max(cert.gap, 0) + 1e-9
            for _ in range(20):
                if problem.is_budgeted:
                    n = np.zeros(problem.s, dtype=int)
                    for i in rng.permutation(problem.s):
                        room = problem.budget_total - problem.costs @ n
                        n[i] = rng.integers(0, int(room // problem.costs[i]) + 1)
                    bound = posterior_budgeted(n, w, problem.costs, problem.budget_total, p)
                elif rng.random() < 0.3 and problem.N <= problem.s:
                    S = rng.choice(problem.s, size=int(rng.integers(1, problem.N + 1)), replace=False)
                    n = np.isin(np.arange(problem.s), S).astype(int)
                    bound = posterior_binary(S, w, problem.N, p)
                else:
                    total = int(rng.integers(1, problem.N + 1))
                    n = rng.multinomial(total, rng.dirichlet(np.ones(problem.s)))
                    bound = posterior_replicated(n, w, problem.N, p)
                ratio = phi_p(n, stack, p) / relax_value
                assert bound <= ratio + slack, (problem.label, n, bound, ratio)


# 6 -------------------------------------------------------------------------

def test_criterion_6_rounding_prior_bounds():
    with record(6, "prior bounds", "incremental rounding and top-N on solved relaxations"):
        topn_checked = 0
        for problem in random_suite(60, seed=60, ps=PS, s_range=(2, 8), N_range=(1, 8)):
            cert = _solve(problem)
            p, N, s = problem.p, problem.N, problem.s
            slack = 10 * max(cert.gap, 0)
            relax_value = problem.phi(cert.w)
            design = incremental_rounding(cert.w, p, N).design
            ratio = problem.phi(design.n) / relax_value
            assert ratio >= prior_factor_replicated(p, N, s) - slack, (problem.label, ratio)
            if N < s and p <= 1 - math.log(N) / math.log(s):
                S = top_n_binary(cert.w, N).design
                ratio = problem.phi(S.n) / relax_value
                assert ratio >= (N / s) ** (1 - p) - slack, (problem.label, ratio)
                topn_checked += 1
        assert topn_checked >= 10


def test_criterion_6_factor_shape():
    with record(6, "prior bounds", "F(0, N=s) = 3/4, F(1) = 1, monotone in p"):
        for s in (1, 2, 5, 40):
            assert prior_factor_replicated(0.0, s, s) == 0.75
            assert prior_factor_replicated(1.0, 3, s) == 1.0
        for x in (0.1, 0.5, 1.0, 2.0):
            F = np.array([prior_factor_ratio(p, x) for p in np.linspace(0, 1, 100)])
            assert np.all(np.diff(F) >= 0), x
            assert F[-1] == 1.0


def test_criterion_6_zero_p_closed_form():
    with record(6, "prior bounds", "p=0 closed form min(N/s, 1-s/(4N)) on an (N, s) grid"):
        mismatches = []
        for s in range(1, 13):
            for N in range(1, 13):
                F = prior_factor_replicated(0.0, N, s)
                closed = min(N / s, 1 - s / (4 * N))
                if abs(F - closed) > 1e-12:
                    mismatches.append((N, s, F, closed))
        below_half = all(N / s < 0.5 for N, s, _, _ in mismatches)
        assert not mismatches, (
            f"{len(mismatches)} grid points differ "
            f"({'all' if below_half else 'not all'} with N/s < 1/2), "
            f"e.g. (N, s, F, closed form) = {mismatches[0]}")


# 7 -------------------------------------------------------------------------

def _singular_psd(rng):
    m = int(rng.integers(3, 7))
    r = int(rng.integers(1, m))
    return random_psd(rng, m, rank=r, scale=float(rng.uniform(0.2, 5.0)))


def test_criterion_7_rank_limit():
    with record(7, "rank limit of trace M^p", "100 singular matrices, p <= 1e-3"):
        rng = np.random.default_rng(7)
        for _ in range(100):
            M = _singular_psd(rng)
            spectrum = eig_psd(M)
            assert spectrum.effective_rank < spectrum.dim
            logdet = spectrum.log_pseudo_det()
            for p in (1e-3, 1e-4, 1e-5):
                err = abs(trace_power(M, p) - spectrum.effective_rank)
                assert err <= 2 * p * abs(logdet), (p, err, logdet)


def test_criterion_7_second_order():
    with record(7, "rank limit of trace M^p", "expansion error is O(p^2)"):
        rng = np.random.default_rng(70)
        for _ in range(100):
            M = _singular_psd(rng)
            spectrum = eig_psd(M)
            errs = [abs(trace_power(M, p) - spectrum.effective_rank - p * spectrum.log_pseudo_det())
                    for p in (1e-2, 1e-3, 1e-4)]
            for big, small in zip(errs, errs[1:]):
                assert 10 <= big / small <= 1000, errs


# 8 -------------------------------------------------------------------------

def _feasible_sorted(rng, s, r, count, cap):
    out = []
    while len(out) < count:
        alpha = rng.choice([0.1, 0.5, 1.0, 3.0, 30.0])
        w = np.sort(rng.dirichlet(np.full(s, alpha)))[::-1] * r
        if cap is None or w[0] <= cap:
            out.append(w)
    return out


@pytest.mark.parametrize("s,r", [(4, 2), (6, 3), (8, 2)])
def test_criterion_8_lemma_bound(s, r):
    with record(8, "floor lemma (r/s)^(1-p)", f"grid search s={s}, r={r}"):
        rng = np.random.default_rng(s * 10 + r)
        uniform = np.full(s, r / s)
        for p in np.linspace(0, 1, 11):
            lhs, rhs = lemma_floor_sides(uniform, r, s, p)
            assert abs(lhs - rhs) <= 1e-12
        # condition (i): every weight at most 1
        capped = _feasible_sorted(rng, s, r, 10**4, cap=1.0)
        for p in np.linspace(0, 1, 11):
            lows = min(lemma_floor_sides(w, r, s, p)[0] for w in capped)
            assert lows >= (r / s) ** (1 - p) - 1e-12, ("capped", p, lows)
        # condition (ii): p <= 1 - ln r / ln s, weights unrestricted
        free = _feasible_sorted(rng, s, r, 10**4, cap=None)
        free.append(np.r_[r, np.zeros(s - 1)])
        limit = 1 - math.log(r) / math.log(s)
        for p in np.linspace(0, limit, 6):
            lows = min(lemma_floor_sides(w, r, s, p)[0] for w in free)
            assert lows >= (r / s) ** (1 - p) - 1e-12, ("smallp", p, lows)


# 9 -------------------------------------------------------------------------

def test_criterion_9_wolsey_constant():
    with record(9, "budgeted factors", "beta by bisection"):
        beta = wolsey_beta()
        assert abs(math.exp(beta) - 2 + beta) <= 1e-12
        assert 0.357 <= 1 - math.exp(-beta) <= 0.358


def test_criterion_9_budgeted_algorithms():
    with record(9, "budgeted factors", "Wolsey and Sviridenko on 20 enumerable instances"):
        for k in range(20):
            kind = ("random-psd", "rank-one", "coverage")[k % 3]
            problem = generate(kind, {"m": 3, "s": 5, "p": float(PS[k % 4]),
                                      "budget": float(3 + k % 4), "cost_range": [0.8, 2.5]}, seed=k)
            opt = brute_force_optimum(problem)
            wolsey = greedy_budgeted_wolsey(problem)
            sv = sviridenko_budgeted(problem)
            assert wolsey.is_feasible(problem) and sv.is_feasible(problem)
            assert problem.phi(wolsey.n) >= 0.357 * opt * (1 - 1e-12), problem.label
            assert problem.phi(wolsey.n) >= wolsey_factor() * opt * (1 - 1e-12), problem.label
            assert problem.phi(sv.n) >= (1 - math.exp(-1)) * opt * (1 - 1e-12), problem.label


# 10 ------------------------------------------------------------------------

FUNCS = ("power", "power_minus_one", "log")


def test_criterion_10_frechet_symmetry():
    with record(10, "Frechet derivative lemmas", "symmetry on 200 triples"):
        rng = np.random.default_rng(10)
        for k in range(200):
            m = int(rng.integers(2, 6))
            M = random_psd(rng, m) + 0.1 * np.eye(m)
            A, B = (rng.standard_normal((m, m)) for _ in range(2))
            A, B = A + A.T, B + B.T
            f, p = FUNCS[k % 3], float(rng.uniform(0.05, 0.95))
            left = np.trace(A @ frechet_derivative(f, M, B, p))
            right = np.trace(B @ frechet_derivative(f, M, A, p))
            assert abs(left - right) <= 1e-9, (f, left, right)


def test_criterion_10_commuting_case():
    with record(10, "Frechet derivative lemmas", "diagonal inputs give f'(M) A exactly"):
        rng = np.random.default_rng(11)
        derivs = {"power": lambda x, p: p * x ** (p - 1.0),
                  "power_minus_one": lambda x, p: (p - 1.0) * x ** (p - 2.0),
                  "log": lambda x, p: 1.0 / x}
        for k in range(60):
            d = rng.uniform(0.1, 5.0, size=int(rng.integers(1, 6)))
            h = rng.standard_normal(d.size)
            f, p = FUNCS[k % 3], float(rng.uniform(0.05, 0.95))
            out = frechet_derivative(f, np.diag(d), np.diag(h), p)
            assert_array_equal(out, np.diag(derivs[f](d, p) * h))


def test_criterion_10_gradient_finite_differences():
    with record(10, "Frechet derivative lemmas", "gradient_trace vs finite differences"):
        rng = np.random.default_rng(12)
        for k in range(100):
            m = int(rng.integers(2, 6))
            M = random_psd(rng, m) + 0.5 * np.eye(m)
            A = random_psd(rng, m, rank=int(rng.integers(1, m + 1)))
            p = float(rng.choice([0.0, 0.25, 0.5, 0.75]))
            h = 1e-5 * np.linalg.norm(M) / np.linalg.norm(A)
            if p == 0:
                f = lambda X: eig_psd(X).log_pseudo_det()
                scale = 1.0
            else:
                f = lambda X: trace_power(X, p)
                scale = p
            fd = (f(M + h * A) - f(M - h * A)) / (2 * h)
            analytic = scale * gradient_trace(M, p, A)
            assert abs(analytic - fd) <= 1e-6 * abs(fd), (p, analytic, fd)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
