"""Solver backends behind one small interface.

``EmbeddedSolver`` is the in-house simplex + branch-and-bound. ``HighsSolver``
adapts scipy's HiGHS bindings and is what the closed loop uses by default,
since a 72-hour bidding model is too large for dense pure-Python pivoting
at one solve per simulated hour.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .bnb import _Relaxation, branch_and_bound
from .model import MilpSolution, ModelIR, SolverError


@dataclass
class EmbeddedSolver:
    time_limit: float = 10.0
    node_limit: int = 100_000
    int_tol: float = 1e-6
    rel_gap: float = 1e-6
    name = "embedded"

    def solve_lp(self, model: ModelIR) -> MilpSolution:
        rel = _Relaxation(model)
        lp = rel.solve(rel.lb, rel.ub)
        if lp.status != "optimal":
            return MilpSolution(lp.status, backend=self.name, nodes=1)
        return MilpSolution("optimal", rel.sign * lp.objective, lp.x, 0.0, 1, self.name)

    def solve_milp(self, model: ModelIR) -> MilpSolution:
        return branch_and_bound(model, time_limit=self.time_limit,
                                node_limit=self.node_limit, int_tol=self.int_tol,
                                rel_gap=self.rel_gap)


@dataclass
class HighsSolver:
    time_limit: float = 10.0
    rel_gap: float = 1e-6
    name = "highs"

    def _run(self, model: ModelIR, integral: bool) -> MilpSolution:
        sign = -1.0 if model.sense == "max" else 1.0
        c = sign * model.objective_vector()
        lb, ub = model.bounds()
        ints = model.integrality().astype(int) if integral else np.zeros(model.n_vars, int)
        cons = []
        if model.n_constraints:
            A, lo, hi = model.constraint_matrix()
            cons = [LinearConstraint(A, lo, hi)]
        opts = {"time_limit": self.time_limit, "mip_rel_gap": self.rel_gap, "disp": False}
        res = milp(c, integrality=ints, bounds=Bounds(lb, ub), constraints=cons, options=opts)
        if res.status == 2:
            # presolve can report an unbounded model as infeasible; confirm without it
            res = milp(c, integrality=ints, bounds=Bounds(lb, ub), constraints=cons,
                       options={**opts, "presolve": False})
        if res.status == 2:
            return MilpSolution("infeasible", backend=self.name)
        if res.status == 3:
            return MilpSolution("unbounded", backend=self.name)
        if res.x is None:
            if res.status == 1:
                return MilpSolution("budget_exhausted", backend=self.name)
            raise SolverError(f"HiGHS failed: {res.message}")
        x = np.asarray(res.x, dtype=float)
        mask = ints.astype(bool)
        x[mask] = np.round(x[mask])
        gap = float(getattr(res, "mip_gap", 0.0) or 0.0)
        status = "optimal" if res.status == 0 else "feasible_budget_hit"
        return MilpSolution(status, sign * float(res.fun), x, gap if math.isfinite(gap) else 0.0,
                            int(getattr(res, "mip_node_count", 0) or 0), self.name)

    def solve_lp(self, model: ModelIR) -> MilpSolution:
        return self._run(model, integral=False)

    def solve_milp(self, model: ModelIR) -> MilpSolution:
        return self._run(model, integral=True)


def make_solver(name: str = "highs", time_limit: float = 10.0, rel_gap: float = 1e-6):
    if name == "highs":
        return HighsSolver(time_limit=time_limit, rel_gap=rel_gap)
    if name == "embedded":
        return EmbeddedSolver(time_limit=time_limit, rel_gap=rel_gap)
    raise ValueError(f"unknown solver backend {name!r}")
