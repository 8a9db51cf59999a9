"""Mixed-integer linear programming: model IR, embedded solver, HiGHS adapter."""
from .backends import EmbeddedSolver, HighsSolver, make_solver
from .model import (RELATIONS, STATUSES, MilpSolution, ModelError, ModelIR,
                    SolverError)


def solve_lp(model: ModelIR, solver=None) -> MilpSolution:
    """Solve the continuous relaxation (integrality flags ignored)."""
    return (solver or EmbeddedSolver()).solve_lp(model)


def solve_milp(model: ModelIR, solver=None, *, time_limit: float = 10.0,
               node_limit: int = 100_000) -> MilpSolution:
    """Solve with the embedded branch-and-bound unless another backend is given."""
    if solver is None:
        solver = EmbeddedSolver(time_limit=time_limit, node_limit=node_limit)
    return solver.solve_milp(model)


__all__ = [
    "RELATIONS", "STATUSES", "EmbeddedSolver", "HighsSolver", "MilpSolution",
    "ModelError", "ModelIR", "SolverError", "make_solver", "solve_lp", "solve_milp",
]
