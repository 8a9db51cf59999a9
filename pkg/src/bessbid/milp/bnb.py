"""Branch-and-bound over the embedded simplex.

Node selection is depth-first until a first incumbent exists, then
best-bound. Branching picks the most fractional integer variable.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .model import MilpSolution, ModelIR
from .simplex import LpResult, solve_bounded_lp


@dataclass
class _Node:
    bound: float          # parent LP value (min form), a valid lower bound
    lb: np.ndarray
    ub: np.ndarray
    depth: int


class _Relaxation:
    """Dense arrays of a model in min form, shared by every node."""

    def __init__(self, model: ModelIR):
        self.sign = -1.0 if model.sense == "max" else 1.0
        self.c = self.sign * model.objective_vector()
        A, self.row_lo, self.row_hi = model.constraint_matrix()
        self.A = A.toarray()
        self.lb, self.ub = model.bounds()
        self.ints = np.flatnonzero(model.integrality())

    def solve(self, lb, ub) -> LpResult:
        return solve_bounded_lp(self.c, self.A, self.row_lo, self.row_hi, lb, ub)


def _most_fractional(x: np.ndarray, ints: np.ndarray, tol: float) -> int:
    if ints.size == 0:
        return -1
    frac = np.abs(x[ints] - np.round(x[ints]))
    k = int(np.argmax(frac))
    return int(ints[k]) if frac[k] > tol else -1


def branch_and_bound(model: ModelIR, *, time_limit: float = 10.0,
                     node_limit: int = 100_000, int_tol: float = 1e-6,
                     rel_gap: float = 1e-6) -> MilpSolution:
    rel = _Relaxation(model)
    start = time.monotonic()

    def finish(status, x=None, obj_min=math.nan, gap=math.nan, nodes=0):
        obj = rel.sign * obj_min if x is not None else math.nan
        return MilpSolution(status, obj, x, gap, nodes, "embedded")

    root = rel.solve(rel.lb, rel.ub)
    if root.status != "optimal":
        return finish(root.status, nodes=1)
    if rel.ints.size == 0:
        return finish("optimal", root.x, root.objective, 0.0, 1)

    inc_x, inc_obj = None, math.inf
    open_nodes: list[_Node] = []
    nodes = 0

    def prune_level() -> float:
        return inc_obj - rel_gap * max(1.0, abs(inc_obj))

    def process(node: _Node, lp: LpResult) -> None:
        nonlocal inc_x, inc_obj
        if lp.status != "optimal" or lp.objective >= prune_level():
            return
        j = _most_fractional(lp.x, rel.ints, int_tol)
        if j < 0:
            x = lp.x.copy()
            x[rel.ints] = np.round(x[rel.ints])
            inc_x, inc_obj = x, lp.objective
            return
        v = lp.x[j]
        down_ub = node.ub.copy()
        down_ub[j] = math.floor(v)
        up_lb = node.lb.copy()
        up_lb[j] = math.ceil(v)
        down = _Node(lp.objective, node.lb, down_ub, node.depth + 1)
        up = _Node(lp.objective, up_lb, node.ub, node.depth + 1)
        # push the rounding-preferred child last so the dive pops it first
        if v - math.floor(v) >= 0.5:
            open_nodes.extend([down, up])
        else:
            open_nodes.extend([up, down])

    process(_Node(root.objective, rel.lb, rel.ub, 0), root)
    nodes = 1
    budget_hit = False
    while open_nodes:
        if time.monotonic() - start > time_limit or nodes >= node_limit:
            budget_hit = True
            break
        if inc_x is None:
            node = open_nodes.pop()
        else:
            k = min(range(len(open_nodes)), key=lambda i: open_nodes[i].bound)
            node = open_nodes.pop(k)
            if node.bound >= prune_level():
                continue
        nodes += 1
        process(node, rel.solve(node.lb, node.ub))

    if inc_x is None:
        return finish("budget_exhausted" if budget_hit else "infeasible", nodes=nodes)
    x = _polish(rel, inc_x)
    obj_min = float(rel.c @ x)
    if budget_hit and open_nodes:
        best = min(min(n.bound for n in open_nodes), obj_min)
        gap = (obj_min - best) / max(1.0, abs(obj_min))
        if gap > rel_gap:
            return finish("feasible_budget_hit", x, obj_min, gap, nodes)
    return finish("optimal", x, obj_min, 0.0, nodes)


def _polish(rel: _Relaxation, x: np.ndarray) -> np.ndarray:
    """Re-solve the continuous part with integers fixed at their rounded values."""
    lb, ub = rel.lb.copy(), rel.ub.copy()
    lb[rel.ints] = ub[rel.ints] = np.round(x[rel.ints])
    lp = rel.solve(lb, ub)
    return lp.x if lp.status == "optimal" else x
