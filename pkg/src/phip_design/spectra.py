"""Spectral machinery for symmetric positive semidefinite matrices.

Everything in the package that looks at eigenvalues goes through this module:
the objective ``phi_p(n) = trace(M_F(n)^p)``, Kiefer's normalized criterion,
gradients ``trace(M^(p-1) M_i)`` and first-divided-difference Frechet
derivatives of spectral functions.

Matrices are plain ``numpy`` arrays.  Symmetry is checked on entry and the
matrix is symmetrized (``(M + M.T) / 2``) before any eigensolver call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import (
    DimensionMismatch,
    IndefiniteBeyondTol,
    NotPsd,
    NotSymmetric,
    RankDeficientObservations,
    SingularInformationMatrix,
    ValidationError,
)

EPS = np.finfo(float).eps

#: relative symmetry tolerance, scaled by the largest absolute entry
SYM_TOL = 1e-9

#: relative eigenvalue gap below which divided differences use f'
EIG_TIE_TOL = 1e-8


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def check_symmetric(M, sym_tol: float = SYM_TOL) -> np.ndarray:
    """Validate a square symmetric matrix and return its symmetrized copy."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValidationError("matrix has non-finite entries")
    if M.size:
        scale = np.max(np.abs(M))
        asym = np.max(np.abs(M - M.T))
        if asym > sym_tol * scale:
            raise NotSymmetric(
                f"matrix is not symmetric: max |M - M^T| = {asym:.3g} "
                f"> {sym_tol:g} * {scale:.3g}"
            )
    return 0.5 * (M + M.T)


def default_rank_tol(lam_max: float, m: int) -> float:
    """Numerical-rank cutoff ``m * eps * lambda_max``."""
    return m * EPS * max(float(lam_max), 0.0)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a PSD matrix, sorted in descending order.

    Eigenvalues at or below ``rank_tol`` are numerically zero: they are not
    counted in ``effective_rank`` and contribute nothing to power sums.
    ``eigenvectors`` (columns, same order) is only filled on request.
    """

    eigenvalues: np.ndarray
    rank_tol: float
    effective_rank: int
    eigenvectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def positive(self) -> np.ndarray:
        """The numerically positive eigenvalues."""
        return self.eigenvalues[: self.effective_rank]

    def power_sum(self, p: float) -> float:
        """``sum_k lambda_k^p`` over positive eigenvalues (the rank at p=0)."""
        if p == 0:
            return float(self.effective_rank)
        return float(np.sum(self.positive**p))

    def log_pseudo_det(self) -> float:
        return float(np.sum(np.log(self.positive)))


def eig_psd(M, rank_tol: float | None = None, *, vectors: bool = False) -> Spectrum:
    """Eigendecomposition of a symmetric PSD matrix.

    Parameters
    ----------
    M : array_like, shape (m, m)
        Symmetric matrix.
    rank_tol : float, optional
        Numerical-rank cutoff. Defaults to ``m * eps * lambda_max``.
    vectors : bool
        Also return eigenvectors.

    Raises
    ------
    NotSymmetric
        If ``M`` is not symmetric within ``SYM_TOL``.
    IndefiniteBeyondTol
        If an eigenvalue is below ``-rank_tol``.
    """
    M = check_symmetric(M)
    m = M.shape[0]
    if vectors:
        lam, Q = np.linalg.eigh(M)
        lam, Q = lam[::-1], Q[:, ::-1]
    else:
        lam, Q = np.linalg.eigvalsh(M)[::-1], None
    tol = default_rank_tol(lam[0] if m else 0.0, m) if rank_tol is None else float(rank_tol)
    if m and lam[-1] < -tol:
        raise IndefiniteBeyondTol(
            f"eigenvalue {lam[-1]:.6g} is below -rank_tol = {-tol:.3g}"
        )
    lam = np.maximum(lam, 0.0)
    rank = int(np.count_nonzero(lam > tol))
    return Spectrum(_readonly(lam), tol, rank, None if Q is None else _readonly(Q))


@dataclass(frozen=True, eq=False)
class PsdAtom:
    """Information matrix ``M_i`` of one experiment.

    When built from observation rows ``A_i`` the matrix is ``A_i^T A_i`` and
    the rows are kept so that the problem can be written back as it was read.
    """

    name: str
    matrix: np.ndarray
    rows: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        M = check_symmetric(self.matrix)
        if self.rows is not None:
            A = np.asarray(self.rows, dtype=float)
            if A.ndim != 2 or A.shape[1] != M.shape[0]:
                raise DimensionMismatch(
                    f"atom {self.name!r}: rows of shape {A.shape} do not match dim {M.shape[0]}"
                )
            gram = A.T @ A
            scale = max(np.max(np.abs(gram)), 1.0) if gram.size else 1.0
            if np.max(np.abs(gram - M), initial=0.0) > SYM_TOL * scale:
                raise ValidationError(f"atom {self.name!r}: matrix differs from rows^T rows")
            object.__setattr__(self, "rows", _readonly(A))
        try:
            eig_psd(M)
        except IndefiniteBeyondTol as exc:
            raise NotPsd(f"atom {self.name!r} is not PSD: {exc}") from None
        object.__setattr__(self, "matrix", _readonly(M))

    @classmethod
    def from_rows(cls, name: str, rows) -> "PsdAtom":
        A = np.atleast_2d(np.asarray(rows, dtype=float))
        return cls(name, A.T @ A, A)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __eq__(self, other):
        if not isinstance(other, PsdAtom):
            return NotImplemented
        return self.name == other.name and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash((self.name, self.matrix.shape))


def as_atom_stack(atoms) -> np.ndarray:
    """Stack atoms into an ``(s, m, m)`` float array.

    Accepts a 3-d array, a sequence of :class:`PsdAtom`, or a sequence of
    square matrices.  Objects exposing ``atom_stack`` (problems) are unwrapped.
    """
    stack = getattr(atoms, "atom_stack", None)
    if stack is not None:
        return stack
    if isinstance(atoms, np.ndarray):
        stack = atoms.astype(float, copy=False)
    else:
        mats = [a.matrix if isinstance(a, PsdAtom) else np.asarray(a, dtype=float) for a in atoms]
        if not mats:
            raise ValidationError("empty atom list")
        shapes = {m.shape for m in mats}
        if len(shapes) != 1:
            raise DimensionMismatch(f"atoms have differing shapes {sorted(shapes)}")
        stack = np.stack(mats)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise DimensionMismatch(f"expected an (s, m, m) atom stack, got shape {stack.shape}")
    return stack


def info_matrix(design, atoms) -> np.ndarray:
    """``M_F(design) = sum_i design_i M_i``."""
    stack = as_atom_stack(atoms)
    d = np.asarray(design, dtype=float).ravel()
    if d.shape[0] != stack.shape[0]:
        raise DimensionMismatch(
            f"design has length {d.shape[0]} but there are {stack.shape[0]} atoms"
        )
    return np.einsum("i,ijk->jk", d, stack)


def _check_p(p, lo=0.0, hi=1.0):
    p = float(p)
    if not lo <= p <= hi:
        raise ValidationError(f"exponent p={p} outside [{lo}, {hi}]")
    return p


def trace_power(M, p: float, rank_tol: float | None = None) -> float:
    """``trace M^p`` for PSD ``M``; the rank of ``M`` at ``p = 0``."""
    return eig_psd(M, rank_tol).power_sum(p)


def phi_p(design, atoms, p: float, rank_tol: float | None = None) -> float:
    """Objective ``phi_p(design) = sum_k lambda_k(M_F(design))^p``, ``p`` in [0, 1].

    At ``p = 0`` this is the numerical rank of ``M_F`` (``0^0 = 0``).
    """
    p = _check_p(p)
    return trace_power(info_matrix(design, atoms), p, rank_tol)


def kiefer_phi(M, p: float, rank_tol: float | None = None) -> float:
    """Kiefer's matrix mean ``Phi_p(M)`` for ``p`` in ``[-inf, 1]``.

    ``lambda_min`` at ``p = -inf``, ``det(M)^(1/m)`` at ``p = 0`` and
    ``((1/m) trace M^p)^(1/p)`` otherwise.  Singular matrices score 0 for
    ``p <= 0``.
    """
    p = float(p)
    if not (p == -np.inf or -np.inf < p <= 1.0):
        raise ValidationError(f"exponent p={p} outside [-inf, 1]")
    spectrum = eig_psd(M, rank_tol)
    m = spectrum.dim
    if p <= 0 and spectrum.effective_rank < m:
        return 0.0
    if p == -np.inf:
        return float(spectrum.eigenvalues[-1])
    if p == 0:
        return float(np.exp(spectrum.log_pseudo_det() / m))
    return float((spectrum.power_sum(p) / m) ** (1.0 / p))


def _inverse_power(M, p: float, rank_tol: float | None):
    """``M^(p-1)`` (``M^-1`` at ``p = 0``) for positive definite ``M``."""
    spectrum = eig_psd(M, rank_tol, vectors=True)
    if spectrum.effective_rank < spectrum.dim:
        raise SingularInformationMatrix(
            f"information matrix has rank {spectrum.effective_rank} < {spectrum.dim}"
        )
    e = p - 1.0 if p > 0 else -1.0
    Q = spectrum.eigenvectors
    return (Q * spectrum.eigenvalues**e) @ Q.T


def gradient_traces(M, p: float, atoms, rank_tol: float | None = None) -> np.ndarray:
    """Vector of ``trace(M^(p-1) M_i)`` over all atoms.

    At ``p = 1`` the power is the identity and ``M`` may be singular.
    """
    p = _check_p(p)
    stack = as_atom_stack(atoms)
    if p == 1.0:
        return np.trace(stack, axis1=1, axis2=2).astype(float)
    P = _inverse_power(M, p, rank_tol)
    return np.einsum("jk,ijk->i", P, stack)


def gradient_trace(M, p: float, atom, rank_tol: float | None = None) -> float:
    """``trace(M^(p-1) M_i)``: partial derivative of ``phi_p`` along atom ``i``.

    Uses exponent -1 at ``p = 0`` (the log-det derivative).

    Raises
    ------
    SingularInformationMatrix
        If ``M`` is not numerically invertible (and ``p < 1``).
    """
    A = atom.matrix if isinstance(atom, PsdAtom) else np.asarray(atom, dtype=float)
    return float(gradient_traces(M, p, A[None], rank_tol)[0])


_SCALAR_FUNCS = {
    "power": (lambda x, p: x**p, lambda x, p: p * x ** (p - 1.0)),
    "power_minus_one": (lambda x, p: x ** (p - 1.0), lambda x, p: (p - 1.0) * x ** (p - 2.0)),
    "log": (lambda x, p: np.log(x), lambda x, p: 1.0 / x),
}
_ALIASES = {"x^p": "power", "x^(p-1)": "power_minus_one", "x^{p-1}": "power_minus_one"}


def divided_difference(lam, f: str, p: float = 0.5, eig_tie_tol: float | None = None) -> np.ndarray:
    """First divided difference matrix ``f^[1]`` at eigenvalues ``lam``.

    Entries with ``|lam_i - lam_j| <= eig_tie_tol`` use ``f'`` at the mean
    eigenvalue; the default cutoff is ``EIG_TIE_TOL * max(lam)``.
    """
    f = _ALIASES.get(f, f)
    if f not in _SCALAR_FUNCS:
        raise ValidationError(f"unknown scalar function {f!r}; expected one of {sorted(_SCALAR_FUNCS)}")
    fun, dfun = _SCALAR_FUNCS[f]
    lam = np.asarray(lam, dtype=float)
    if eig_tie_tol is None:
        eig_tie_tol = EIG_TIE_TOL * np.max(lam)
    li, lj = lam[:, None], lam[None, :]
    diff = li - lj
    tie = np.abs(diff) <= eig_tie_tol
    safe = np.where(tie, 1.0, diff)
    fl = fun(lam, p)
    dd = (fl[:, None] - fl[None, :]) / safe
    return np.where(tie, dfun(0.5 * (li + lj), p), dd)


def frechet_derivative(f: str, M, H, p: float = 0.5, *,
                       rank_tol: float | None = None,
                       eig_tie_tol: float | None = None) -> np.ndarray:
    """Directional derivative ``Df(M)(H) = Q (f^[1](D) o Q^T H Q) Q^T``.

    ``f`` names the scalar function: ``"power"`` (x^p), ``"power_minus_one"``
    (x^(p-1)) or ``"log"``.  ``M`` must be positive definite.  A diagonal ``M``
    skips the eigensolver, so commuting diagonal inputs give ``f'(M) H``
    without rounding from eigenvectors.
    """
    M = check_symmetric(M)
    H = check_symmetric(H)
    if H.shape != M.shape:
        raise DimensionMismatch(f"H has shape {H.shape}, M has shape {M.shape}")
    if np.count_nonzero(M - np.diag(np.diag(M))) == 0:
        lam = np.diag(M).copy()
        tol = default_rank_tol(lam.max(initial=0.0), len(lam)) if rank_tol is None else rank_tol
        if np.any(lam <= tol):
            raise SingularInformationMatrix("M is not positive definite")
        return divided_difference(lam, f, p, eig_tie_tol) * H
    spectrum = eig_psd(M, rank_tol, vectors=True)
    if spectrum.effective_rank < spectrum.dim:
        raise SingularInformationMatrix("M is not positive definite")
    Q = spectrum.eigenvectors
    inner = divided_difference(spectrum.eigenvalues, f, p, eig_tie_tol) * (Q.T @ H @ Q)
    out = Q @ inner @ Q.T
    return 0.5 * (out + out.T)


def submodularity_slack(X, Y, Z, p: float) -> float:
    """``tr(X+Z)^p + tr(Y+Z)^p - tr(X+Y+Z)^p - tr(Z)^p``, nonnegative for PSD inputs."""
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise ValidationError(f"exponent p={p} outside (0, 1]")
    X, Y, Z = (check_symmetric(a) for a in (X, Y, Z))
    if not X.shape == Y.shape == Z.shape:
        raise DimensionMismatch("X, Y, Z must share one shape")
    return (trace_power(X + Z, p) + trace_power(Y + Z, p)
            - trace_power(X + Y + Z, p) - trace_power(Z, p))


def blue_estimate(blocks: Sequence, y) -> np.ndarray:
    """Best linear unbiased estimate ``(A^T A)^-1 A^T y`` for stacked observations.

    ``blocks`` lists the observation matrices ``A_i`` of the conducted
    experiments in measurement order (a replicated experiment appears once per
    replication); ``y`` is the matching stacked observation vector.
    """
    A = np.vstack([np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks])
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"{A.shape[0]} observation rows but {y.shape[0]} observations")
    rank = np.linalg.matrix_rank(A)
    if rank < A.shape[1]:
        raise RankDeficientObservations(f"observation matrix has rank {rank} < {A.shape[1]}")
    theta, *_ = np.linalg.lstsq(A, y, rcond=None)
    return theta
