"""Estimator-style wrappers.

``fit`` takes the atoms as an ``(s, m, m)`` array (or a list of matrices or
a ``DesignProblem``) and stores the solved design in trailing-underscore
attributes.  ``RankProjector`` is a transformer mapping atoms onto the range
of their sum.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .bounds import build_certificate
from .combinat import greedy, greedy_budgeted_wolsey, sviridenko_budgeted
from .exceptions import DimensionMismatch, ValidationError
from .instance import Budget, DesignProblem, Replication, project_if_rank_deficient
from .relax import DEFAULT_MAX_ITER, DEFAULT_TOL, solve_continuous
from .rounding import apportionment, budgeted_dp, incremental_rounding, top_n_binary
from .spectra import PsdAtom, as_atom_stack, check_symmetric, eig_psd


def check_atoms(X) -> np.ndarray:
    """Validate atoms and return them as a float ``(s, m, m)`` stack.

    Raises ``DimensionMismatch``, ``NotSymmetric`` or ``IndefiniteBeyondTol``.
    """
    stack = np.array(as_atom_stack(X), dtype=float)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2] or stack.shape[0] == 0:
        raise DimensionMismatch(f"expected a non-empty (s, m, m) stack, got shape {stack.shape}")
    for k in range(stack.shape[0]):
        stack[k] = check_symmetric(stack[k])
        eig_psd(stack[k])
    return stack


def _problem(X, p, N=None, costs=None, budget=None) -> DesignProblem:
    if isinstance(X, DesignProblem):
        if N is None and costs is None:
            return X.with_p(p) if p is not None else X
        X = X.atoms
    stack = check_atoms(X)
    atoms = tuple(PsdAtom(f"a{i + 1}", M) for i, M in enumerate(stack))
    if costs is not None:
        mode = Budget(tuple(costs), budget)
    else:
        if N is None:
            raise ValidationError("N (or costs and budget) must be set")
        mode = Replication(N)
    return DesignProblem(atoms, 0.5 if p is None else p, mode)


class RankProjector(TransformerMixin, BaseEstimator):
    """Project atoms onto the range of ``sum_i M_i``.

    Attributes
    ----------
    basis_ : ndarray of shape (m, r)
        Orthonormal basis of the range.
    rank_ : int
    """

    def __init__(self, rank_tol=None):
        self.rank_tol = rank_tol

    def fit(self, X, y=None):
        stack = check_atoms(X)
        problem = DesignProblem(tuple(stack), 0.0, Replication(1))
        _, self.basis_ = project_if_rank_deficient(problem, self.rank_tol)
        self.rank_ = self.basis_.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        stack = check_atoms(X)
        if stack.shape[1] != self.basis_.shape[0]:
            raise DimensionMismatch("atoms do not match the fitted dimension")
        return np.einsum("ji,sjk,kl->sil", self.basis_, stack, self.basis_)


class ContinuousDesign(BaseEstimator):
    """Relaxation optimum ``w*`` for atoms ``X``.

    Parameters
    ----------
    p : float
        Exponent in ``[0, 1]``.
    N : int, optional
        Replication budget; alternatively give ``costs`` and ``budget``.
    tol, max_iter : float, int
        Passed to the multiplicative solver.

    Attributes
    ----------
    weights_ : ndarray
    gap_ : float
    certificate_ : RelaxationCertificate
    problem_ : DesignProblem
    """

    def __init__(self, p=0.5, N=None, costs=None, budget=None, tol=DEFAULT_TOL,
                 max_iter=DEFAULT_MAX_ITER):
        self.p = p
        self.N = N
        self.costs = costs
        self.budget = budget
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        self.problem_ = _problem(X, self.p, self.N, self.costs, self.budget)
        self.certificate_ = solve_continuous(self.problem_, self.tol, self.max_iter)
        self.weights_ = np.array(self.certificate_.w)
        self.gap_ = self.certificate_.gap
        return self

    def score(self, X=None, y=None):
        """Unnormalized objective ``phi_p(w*)``."""
        check_is_fitted(self, "weights_")
        return self.problem_.phi(self.weights_)


_ROUNDERS = ("round", "topn", "apportion", "dp")
_GREEDY = ("greedy", "greedy-binary", "wolsey", "sviridenko")


class IntegerDesignEstimator(ContinuousDesign):
    """Integer design by rounding the relaxation or by a greedy method.

    Parameters
    ----------
    method : str
        One of ``round``, ``topn``, ``apportion``, ``dp`` (rounding ``w*``) or
        ``greedy``, ``greedy-binary``, ``wolsey``, ``sviridenko``.

    Attributes
    ----------
    design_ : IntegerDesign
    efficiency_ : EfficiencyCertificate
        Bounds against the relaxation solved in the same call.
    """

    def __init__(self, method="round", p=0.5, N=None, costs=None, budget=None,
                 tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
        super().__init__(p=p, N=N, costs=costs, budget=budget, tol=tol, max_iter=max_iter)
        self.method = method

    def fit(self, X, y=None):
        if self.method not in _ROUNDERS + _GREEDY:
            raise ValidationError(f"unknown method {self.method!r}")
        super().fit(X)
        self.design_ = run_method(self.problem_, self.method, self.weights_)
        self.efficiency_ = build_certificate(self.problem_, self.design_, self.certificate_,
                                             self.method)
        return self

    def predict(self, X=None):
        """Replication counts of the fitted design."""
        check_is_fitted(self, "design_")
        return np.array(self.design_.n)


def run_method(problem: DesignProblem, method: str, w=None):
    """Integer design for ``problem`` by ``method``; ``w`` is the relaxation optimum."""
    from .exceptions import NotApplicable

    p = problem.p
    if method == "greedy":
        return greedy(problem, "replicated", lazy=True)[0]
    if method == "greedy-binary":
        return greedy(problem, "binary", lazy=True)[0]
    if method == "wolsey":
        return greedy_budgeted_wolsey(problem)
    if method == "sviridenko":
        return sviridenko_budgeted(problem)
    if method == "dp":
        return budgeted_dp(w, problem.costs, problem.budget_total, p).design
    if problem.is_budgeted:
        raise NotApplicable(f"method {method!r} needs a replication budget N")
    if method == "round":
        return incremental_rounding(w, p, problem.N).design
    if method == "topn":
        if problem.N > problem.s:
            raise NotApplicable("top-N needs N <= s")
        return top_n_binary(w, problem.N, p).design
    if method == "apportion":
        return apportionment(w, problem.N, p).design
    raise ValidationError(f"unknown method {method!r}")
