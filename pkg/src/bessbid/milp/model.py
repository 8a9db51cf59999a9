"""Solver-agnostic MILP representation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

RELATIONS = ("<=", "==", ">=")
_REL_ALIASES = {"<=": "<=", "le": "<=", "==": "==", "=": "==", "eq": "==", ">=": ">=", "ge": ">="}

STATUSES = ("optimal", "feasible_budget_hit", "infeasible", "unbounded", "budget_exhausted")


class ModelError(ValueError):
    pass


class SolverError(RuntimeError):
    """Numerical trouble inside a backend; callers treat it like a failed solve."""


@dataclass
class Variable:
    name: str
    lb: float
    ub: float
    integral: bool


@dataclass
class Constraint:
    cols: np.ndarray
    vals: np.ndarray
    relation: str
    rhs: float


@dataclass
class MilpSolution:
    status: str
    objective: float = math.nan
    x: np.ndarray | None = None
    gap: float = math.nan
    nodes: int = 0
    backend: str = ""

    @property
    def has_solution(self) -> bool:
        return self.status in ("optimal", "feasible_budget_hit") and self.x is not None

    def value(self, handle: int) -> float:
        return float(self.x[handle])

    def values(self, handles) -> np.ndarray:
        return self.x[np.asarray(handles, dtype=int)]


class ModelIR:
    """Variables with bounds, sparse linear rows and a linear objective.

    Variable and constraint handles are plain integers in insertion order.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self._index: dict[str, int] = {}
        self.objective: dict[int, float] = {}
        self.sense = "max"
        self.meta: dict = {}          # free-form slot for builders (handles etc.)

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def add_variable(self, name: str, lb: float = 0.0, ub: float = math.inf,
                     integral: bool = False) -> int:
        if name in self._index:
            raise ModelError(f"duplicate variable name {name!r}")
        lb, ub = float(lb), float(ub)
        if math.isnan(lb) or math.isnan(ub):
            raise ModelError(f"NaN bound on {name!r}")
        if lb > ub:
            raise ModelError(f"inverted bounds on {name!r}: {lb} > {ub}")
        if integral and not (math.isfinite(lb) and math.isfinite(ub)):
            raise ModelError(f"integer variable {name!r} needs finite bounds")
        handle = len(self.variables)
        self.variables.append(Variable(name, lb, ub, bool(integral)))
        self._index[name] = handle
        return handle

    def handle(self, name: str) -> int:
        return self._index[name]

    def set_bounds(self, handle: int, lb: float, ub: float) -> None:
        self._check_handle(handle)
        if lb > ub:
            raise ModelError(f"inverted bounds on {self.variables[handle].name!r}")
        self.variables[handle].lb = float(lb)
        self.variables[handle].ub = float(ub)

    def fix(self, handle: int, value: float) -> None:
        self.set_bounds(handle, value, value)

    def _check_handle(self, h) -> None:
        if not (isinstance(h, (int, np.integer)) and 0 <= h < len(self.variables)):
            raise ModelError(f"unknown variable handle {h!r}")

    def _normalize(self, coeffs) -> tuple[np.ndarray, np.ndarray]:
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict[int, float] = {}
        for h, a in items:
            self._check_handle(h)
            acc[int(h)] = acc.get(int(h), 0.0) + float(a)
        cols = np.fromiter(acc.keys(), dtype=np.int64, count=len(acc))
        vals = np.fromiter(acc.values(), dtype=float, count=len(acc))
        return cols, vals

    def add_constraint(self, coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
                       relation: str, rhs: float) -> int:
        rel = _REL_ALIASES.get(relation)
        if rel is None:
            raise ModelError(f"unknown relation {relation!r}")
        cols, vals = self._normalize(coeffs)
        self.constraints.append(Constraint(cols, vals, rel, float(rhs)))
        return len(self.constraints) - 1

    def set_objective(self, coeffs, sense: str = "max") -> None:
        if sense not in ("max", "min"):
            raise ModelError(f"unknown sense {sense!r}")
        cols, vals = self._normalize(coeffs)
        self.objective = dict(zip(cols.tolist(), vals.tolist()))
        self.sense = sense

    # -- array views used by the backends -------------------------------

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for h, a in self.objective.items():
            c[h] = a
        return c

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return lb, ub

    def integrality(self) -> np.ndarray:
        return np.array([v.integral for v in self.variables], dtype=bool)

    def constraint_matrix(self) -> tuple[sparse.csr_matrix, np.ndarray, np.ndarray]:
        """Rows as ``lo <= A x <= hi``."""
        m = len(self.constraints)
        indptr = np.zeros(m + 1, dtype=np.int64)
        lo = np.full(m, -np.inf)
        hi = np.full(m, np.inf)
        for i, con in enumerate(self.constraints):
            indptr[i + 1] = indptr[i] + len(con.cols)
            if con.relation in ("<=", "=="):
                hi[i] = con.rhs
            if con.relation in (">=", "=="):
                lo[i] = con.rhs
        if m:
            indices = np.concatenate([con.cols for con in self.constraints])
            data = np.concatenate([con.vals for con in self.constraints])
        else:
            indices = np.zeros(0, dtype=np.int64)
            data = np.zeros(0)
        A = sparse.csr_matrix((data, indices, indptr), shape=(m, self.n_vars))
        return A, lo, hi

    def objective_value(self, x) -> float:
        return float(self.objective_vector() @ np.asarray(x, dtype=float))

    def max_violation(self, x) -> float:
        """Largest bound, row or integrality violation of a candidate point."""
        x = np.asarray(x, dtype=float)
        lb, ub = self.bounds()
        worst = float(np.max(np.maximum(lb - x, x - ub), initial=0.0))
        if self.constraints:
            A, lo, hi = self.constraint_matrix()
            act = A @ x
            worst = max(worst, float(np.max(np.maximum(lo - act, act - hi), initial=0.0)))
        ints = self.integrality()
        if ints.any():
            worst = max(worst, float(np.max(np.abs(x[ints] - np.round(x[ints])))))
        return worst

    def dump(self) -> str:
        """Plain-text listing, one variable or row per line."""
        def fmt(v: float) -> str:
            return repr(float(v))

        lines = [f"model {self.name}", f"sense {self.sense}"]
        for i, v in enumerate(self.variables):
            kind = "int" if v.integral else "cont"
            lines.append(f"var {i} {v.name} {kind} {fmt(v.lb)} {fmt(v.ub)}")
        obj = " ".join(f"{fmt(a)}*x{h}" for h, a in sorted(self.objective.items()))
        lines.append(f"obj {obj}")
        for i, con in enumerate(self.constraints):
            terms = " ".join(f"{fmt(a)}*x{h}" for h, a in zip(con.cols, con.vals))
            lines.append(f"row {i} {terms} {con.relation} {fmt(con.rhs)}")
        return "\n".join(lines) + "\n"
