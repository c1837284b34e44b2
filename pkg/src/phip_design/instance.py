"""Problem data model, JSON documents, projection and synthetic instances."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Union

import numpy as np

from .exceptions import (
    BadParams,
    DimensionMismatch,
    ParseError,
    SchemaError,
    ValidationError,
)
from .spectra import PsdAtom, _readonly, as_atom_stack, default_rank_tol, phi_p

FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class Replication:
    """At most ``N`` unit experiments in total."""

    N: int

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise ValidationError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))


@dataclass(frozen=True)
class Budget:
    """Experiment ``i`` costs ``costs[i]``; total spend at most ``budget``."""

    costs: tuple
    budget: float

    def __post_init__(self):
        costs = tuple(float(c) for c in self.costs)
        if not all(math.isfinite(c) and c > 0 for c in costs):
            raise ValidationError("costs must be finite and positive")
        if not (math.isfinite(self.budget) and self.budget > 0):
            raise ValidationError("budget must be finite and positive")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "budget", float(self.budget))

    def cost_fractions(self) -> list[Fraction]:
        """Costs as exact fractions of their shortest decimal literals."""
        return [Fraction(repr(c)) for c in self.costs]


BudgetMode = Union[Replication, Budget]


@dataclass(frozen=True)
class DesignProblem:
    """Atoms ``M_1..M_s`` of a common dimension, an exponent and a budget."""

    atoms: tuple
    p: float
    budget_mode: BudgetMode
    label: str = ""
    atom_stack: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if not atoms:
            raise ValidationError("a problem needs at least one atom")
        if not all(isinstance(a, PsdAtom) for a in atoms):
            atoms = tuple(a if isinstance(a, PsdAtom) else PsdAtom(f"a{i + 1}", a)
                          for i, a in enumerate(atoms))
        dims = {a.dim for a in atoms}
        if len(dims) != 1:
            raise DimensionMismatch(f"atoms have differing dimensions {sorted(dims)}")
        p = float(self.p)
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"exponent p={p} outside [0, 1]")
        mode = self.budget_mode
        if isinstance(mode, Budget):
            if len(mode.costs) != len(atoms):
                raise DimensionMismatch(f"{len(mode.costs)} costs for {len(atoms)} atoms")
            if mode.budget < min(mode.costs):
                raise ValidationError("budget is smaller than every cost")
        elif not isinstance(mode, Replication):
            raise ValidationError(f"unknown budget mode {mode!r}")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "atom_stack", _readonly(np.stack([a.matrix for a in atoms])))

    @property
    def s(self) -> int:
        return len(self.atoms)

    @property
    def dim(self) -> int:
        return self.atoms[0].dim

    @property
    def is_budgeted(self) -> bool:
        return isinstance(self.budget_mode, Budget)

    @property
    def N(self) -> int:
        if self.is_budgeted:
            raise AttributeError("budgeted problems have no cardinality N")
        return self.budget_mode.N

    @property
    def costs(self) -> np.ndarray:
        """Per-unit costs; all ones in replication mode."""
        if self.is_budgeted:
            return np.array(self.budget_mode.costs)
        return np.ones(self.s)

    @property
    def budget_total(self) -> float:
        """``N`` in replication mode, ``B`` in budget mode."""
        return float(self.budget_mode.budget if self.is_budgeted else self.budget_mode.N)

    def with_p(self, p: float) -> "DesignProblem":
        return replace(self, p=p)

    def with_N(self, N: int) -> "DesignProblem":
        return replace(self, budget_mode=Replication(N))

    def phi(self, design) -> float:
        return phi_p(design, self.atom_stack, self.p)


@dataclass(frozen=True)
class WeightVector:
    """Continuous design ``w >= 0`` with its budget use."""

    w: np.ndarray
    budget_used: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite and nonnegative")
        object.__setattr__(self, "w", _readonly(w))

    @classmethod
    def for_problem(cls, w, problem: DesignProblem) -> "WeightVector":
        w = np.asarray(w, dtype=float)
        if w.shape != (problem.s,):
            raise DimensionMismatch(f"weights of shape {w.shape} for {problem.s} atoms")
        used = float(problem.costs @ w)
        if used > problem.budget_total * (1 + FEASIBILITY_TOL):
            raise ValidationError(f"weights use {used} > budget {problem.budget_total}")
        return cls(w, used)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.w, dtype=dtype)

    def __len__(self):
        return len(self.w)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.w > 0)


@dataclass(frozen=True)
class IntegerDesign:
    """Replication counts ``n``; ``binary`` designs have ``n`` in {0, 1}."""

    n: np.ndarray
    binary: bool = False

    def __post_init__(self):
        n = np.asarray(self.n)
        if n.ndim != 1 or not np.all(np.equal(np.mod(n, 1), 0)) or np.any(n < 0):
            raise ValidationError(f"design must be a vector of nonnegative integers, got {n!r}")
        n = n.astype(np.int64)
        if self.binary and np.any(n > 1):
            raise ValidationError("binary design with a count above 1")
        n.setflags(write=False)
        object.__setattr__(self, "n", n)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.n, dtype=dtype)

    def __len__(self):
        return len(self.n)

    @property
    def total(self) -> int:
        return int(self.n.sum())

    def cost(self, problem: DesignProblem) -> float:
        return float(problem.costs @ self.n)

    def is_feasible(self, problem: DesignProblem) -> bool:
        if len(self.n) != problem.s:
            return False
        return self.cost(problem) <= problem.budget_total * (1 + FEASIBILITY_TOL)

    def to_list(self) -> list[int]:
        return [int(v) for v in self.n]


# ---------------------------------------------------------------------------
# JSON documents

_TOP_KEYS = {"label", "m", "p", "N", "costs", "budget", "atoms"}


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)
            and math.isfinite(v))


def _matrix(value, where: str, ncols: int, nrows: int | None = None) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise SchemaError(f"{where}: expected a non-empty array of arrays")
    if nrows is not None and len(value) != nrows:
        raise DimensionMismatch(f"{where}: expected {nrows} rows, got {len(value)}")
    for k, row in enumerate(value):
        if len(row) != ncols:
            raise DimensionMismatch(f"{where}[{k}]: expected {ncols} entries, got {len(row)}")
        if not all(_is_num(x) for x in row):
            raise SchemaError(f"{where}[{k}]: entries must be finite numbers")
    return np.array(value, dtype=float)


def problem_from_dict(doc: dict) -> DesignProblem:
    """Validate a decoded problem document and build the problem."""
    if not isinstance(doc, dict):
        raise SchemaError("problem document must be a JSON object")
    extra = set(doc) - _TOP_KEYS
    if extra:
        raise SchemaError(f"unknown top-level keys {sorted(extra)}")
    for key in ("m", "p", "atoms"):
        if key not in doc:
            raise SchemaError(f"missing required key {key!r}")
    m, p = doc["m"], doc["p"]
    if not _is_int(m) or m < 1:
        raise SchemaError("'m' must be a positive integer")
    if not _is_num(p) or not 0 <= p <= 1:
        raise SchemaError("'p' must be a number in [0, 1]")
    has_n = "N" in doc
    has_budget = "costs" in doc or "budget" in doc
    if has_n == has_budget:
        raise SchemaError("exactly one of 'N' or the pair 'costs'/'budget' is required")
    if has_budget and not ("costs" in doc and "budget" in doc):
        raise SchemaError("'costs' and 'budget' must be given together")

    atoms_doc = doc["atoms"]
    if not isinstance(atoms_doc, list) or not atoms_doc:
        raise SchemaError("'atoms' must be a non-empty array")
    atoms = []
    for i, a in enumerate(atoms_doc):
        where = f"atoms[{i}]"
        if not isinstance(a, dict):
            raise SchemaError(f"{where}: expected an object")
        extra = set(a) - {"name", "matrix", "rows"}
        if extra:
            raise SchemaError(f"{where}: unknown keys {sorted(extra)}")
        name = a.get("name")
        if not isinstance(name, str):
            raise SchemaError(f"{where}: 'name' must be a string")
        if ("matrix" in a) == ("rows" in a):
            raise SchemaError(f"{where}: exactly one of 'matrix' or 'rows' is required")
        if "matrix" in a:
            atoms.append(PsdAtom(name, _matrix(a["matrix"], f"{where}.matrix", m, m)))
        else:
            atoms.append(PsdAtom.from_rows(name, _matrix(a["rows"], f"{where}.rows", m)))

    if has_n:
        if not _is_int(doc["N"]) or doc["N"] < 1:
            raise SchemaError("'N' must be a positive integer")
        mode = Replication(doc["N"])
    else:
        costs, budget = doc["costs"], doc["budget"]
        if not isinstance(costs, list) or not all(_is_num(c) for c in costs):
            raise SchemaError("'costs' must be an array of finite numbers")
        if not _is_num(budget):
            raise SchemaError("'budget' must be a finite number")
        mode = Budget(tuple(costs), budget)
    label = doc.get("label", "")
    if not isinstance(label, str):
        raise SchemaError("'label' must be a string")
    return DesignProblem(tuple(atoms), p, mode, label)


def load_problem(document) -> DesignProblem:
    """Parse a problem document (JSON text, bytes, path or decoded dict).

    Raises
    ------
    ParseError
        Malformed JSON; the message carries line and column.
    SchemaError, DimensionMismatch, NotPsd, NotSymmetric
        Well-formed JSON that violates the problem schema.
    """
    if isinstance(document, Path):
        document = document.read_text(encoding="utf-8")
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return problem_from_dict(document)


def problem_to_dict(problem: DesignProblem) -> dict:
    doc: dict = {}
    if problem.label:
        doc["label"] = problem.label
    doc["m"] = problem.dim
    doc["p"] = problem.p
    if problem.is_budgeted:
        doc["costs"] = list(problem.budget_mode.costs)
        doc["budget"] = problem.budget_mode.budget
    else:
        doc["N"] = problem.N
    atoms = []
    for a in problem.atoms:
        if a.rows is not None:
            atoms.append({"name": a.name, "rows": a.rows.tolist()})
        else:
            atoms.append({"name": a.name, "matrix": a.matrix.tolist()})
    doc["atoms"] = atoms
    return doc


def dump_problem(problem: DesignProblem) -> str:
    """Canonical JSON text of a problem (stable key order, trailing newline)."""
    return json.dumps(problem_to_dict(problem), indent=2) + "\n"


save_problem = dump_problem


# ---------------------------------------------------------------------------
# Projection onto the common range

def project_if_rank_deficient(problem: DesignProblem, rank_tol: float | None = None):
    """Restrict every atom to the range of ``M_F(1) = sum_i M_i``.

    Returns ``(problem, U)``.  When ``M_F(1)`` has rank ``r < m`` the atoms
    become ``U^T M_i U`` with ``U`` the ``r`` leading eigenvectors; otherwise
    the problem is returned as is with ``U = I``.  Every ``phi_p`` value is
    preserved since all designs live in the range of ``M_F(1)``.
    """
    total = problem.atom_stack.sum(axis=0)
    lam, vecs = np.linalg.eigh(0.5 * (total + total.T))
    lam, vecs = lam[::-1], vecs[:, ::-1]
    m = problem.dim
    tol = default_rank_tol(lam[0], m) if rank_tol is None else rank_tol
    r = int(np.count_nonzero(lam > tol))
    if r == m:
        return problem, np.eye(m)
    if r == 0:
        raise ValidationError("every atom is zero")
    U = vecs[:, :r]
    atoms = []
    for a in problem.atoms:
        if a.rows is not None:
            atoms.append(PsdAtom.from_rows(a.name, a.rows @ U))
        else:
            atoms.append(PsdAtom(a.name, U.T @ a.matrix @ U))
    return replace(problem, atoms=tuple(atoms)), U


# ---------------------------------------------------------------------------
# Synthetic instances

def coverage_problem(sets, ground: int, N: int = 1, p: float = 0.0, label: str = "coverage",
                     budget_mode: BudgetMode | None = None) -> DesignProblem:
    """Diagonal 0/1 atoms from a set system over ``{1, ..., ground}``.

    The rank of a sum of these atoms is the size of the union of the chosen
    sets, so ``p = 0`` is a maximum coverage instance.
    """
    atoms = []
    for i, S in enumerate(sets):
        S = sorted(set(S))
        if not S or S[0] < 1 or S[-1] > ground:
            raise BadParams(f"set {i + 1} must be a non-empty subset of 1..{ground}")
        d = np.zeros(ground)
        d[np.array(S) - 1] = 1.0
        atoms.append(PsdAtom(f"S{i + 1}", np.diag(d)))
    return DesignProblem(tuple(atoms), p, budget_mode or Replication(N), label)


_GEN_DEFAULTS = {
    "coverage": {"m": 6, "s": 8, "N": 3, "p": 0.0, "density": 0.35},
    "random-psd": {"m": 3, "s": 6, "N": 3, "p": 0.5, "rows": 1},
    "rank-one": {"m": 3, "s": 6, "N": 3, "p": 0.5, "orthonormal": False},
}
_COMMON = {"label", "budget", "cost_range", "sets"}


def _budget_mode(params, s, rng) -> BudgetMode:
    if "budget" not in params:
        return Replication(int(params["N"]))
    lo, hi = params.get("cost_range", (1.0, 3.0))
    if not 0 < lo <= hi:
        raise BadParams("cost_range must satisfy 0 < lo <= hi")
    costs = tuple(round(float(c), 2) or 0.01 for c in rng.uniform(lo, hi, size=s))
    return Budget(costs, float(params["budget"]))


def generate(kind: str, params: dict | None = None, seed: int = 0) -> DesignProblem:
    """Deterministic synthetic instance.

    ``coverage``
        Diagonal 0/1 atoms.  Random sets (``m`` ground elements, each kept with
        probability ``density``) unless explicit ``sets`` are given.
    ``random-psd``
        ``A_i^T A_i`` with Gaussian ``A_i`` of ``rows`` rows.
    ``rank-one``
        ``a_i a_i^T`` with Gaussian ``a_i``; ``orthonormal=True`` (needs
        ``s <= m``) uses orthonormal vectors instead.

    Passing ``budget`` switches to budget mode with costs drawn from
    ``cost_range`` and rounded to two decimals.
    """
    if kind not in _GEN_DEFAULTS:
        raise BadParams(f"unknown instance kind {kind!r}; expected one of {sorted(_GEN_DEFAULTS)}")
    params = dict(params or {})
    unknown = set(params) - set(_GEN_DEFAULTS[kind]) - _COMMON
    if unknown:
        raise BadParams(f"unknown parameters {sorted(unknown)} for kind {kind!r}")
    full = {**_GEN_DEFAULTS[kind], **params}
    try:
        m, s, N = int(full["m"]), int(full["s"]), int(full["N"])
        p = float(full["p"])
    except (TypeError, ValueError) as exc:
        raise BadParams(str(exc)) from None
    if m < 1 or s < 1 or N < 1 or not 0 <= p <= 1:
        raise BadParams("need m, s, N >= 1 and p in [0, 1]")
    rng = np.random.default_rng(seed)
    label = full.get("label") or f"{kind}-seed{seed}"

    if kind == "coverage":
        if "sets" in full:
            sets = full["sets"]
        else:
            density = float(full["density"])
            if not 0 < density <= 1:
                raise BadParams("density must lie in (0, 1]")
            sets = []
            for _ in range(s):
                mask = rng.random(m) < density
                if not mask.any():
                    mask[rng.integers(m)] = True
                sets.append((np.flatnonzero(mask) + 1).tolist())
        mode = _budget_mode(full, len(sets), rng)
        return coverage_problem(sets, m, p=p, label=label, budget_mode=mode)

    if kind == "random-psd":
        rows = int(full["rows"])
        if rows < 1:
            raise BadParams("rows must be positive")
        atoms = tuple(PsdAtom.from_rows(f"a{i + 1}", rng.standard_normal((rows, m)))
                      for i in range(s))
    else:
        if full["orthonormal"]:
            if s > m:
                raise BadParams("orthonormal rank-one atoms need s <= m")
            Q, _ = np.linalg.qr(rng.standard_normal((m, m)))
            vecs = Q.T[:s]
        else:
            vecs = rng.standard_normal((s, m))
        atoms = tuple(PsdAtom.from_rows(f"a{i + 1}", v[None, :]) for i, v in enumerate(vecs))
    mode = _budget_mode(full, s, rng)
    return DesignProblem(atoms, p, mode, label)


def as_problem(atoms, p: float, N: int | None = None, *, costs=None, budget=None,
               label: str = "") -> DesignProblem:
    """Convenience constructor from a raw atom stack or list."""
    stack = as_atom_stack(atoms)
    named = tuple(a if isinstance(a, PsdAtom) else PsdAtom(f"a{i + 1}", stack[i])
                  for i, a in enumerate(atoms if not isinstance(atoms, np.ndarray) else stack))
    if costs is not None or budget is not None:
        if costs is None or budget is None or N is not None:
            raise ValidationError("give either N, or both costs and budget")
        mode: BudgetMode = Budget(tuple(costs), budget)
    else:
        if N is None:
            raise ValidationError("a budget (N, or costs and budget) is required")
        mode = Replication(N)
    return DesignProblem(named, p, mode, label)
