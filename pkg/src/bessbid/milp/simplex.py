"""Dense two-phase primal simplex for bounded variables.

Solves ``min c @ x`` subject to ``row_lo <= A @ x <= row_hi`` and
``lb <= x <= ub``. Every row gets an activity variable ``r`` with
``A x - r = 0`` and the row bounds become bounds on ``r``, so general
bounds are the only thing the pivoting code has to understand. Nonbasic
variables sit at a finite bound (or at zero when free).

Meant for small and medium models (a few hundred rows): the basis inverse
is kept explicitly and refactored periodically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .model import SolverError

_REFACTOR_EVERY = 64
_BLAND_AFTER = 30


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None = None
    objective: float = math.nan
    iterations: int = 0


def _initial_point(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    return x.astype(float)


def _iterate(M, cost, lo, hi, x, basis, *, tol_d, tol_piv, max_iter):
    """Run primal simplex from a primal-feasible basis. Mutates x and basis."""
    m, N = M.shape
    is_basic = np.zeros(N, dtype=bool)
    is_basic[basis] = True
    nonbasic_mask = ~is_basic
    Binv = np.linalg.inv(M[:, basis])
    degenerate_run = 0
    bland = False

    for it in range(max_iter):
        if it and it % _REFACTOR_EVERY == 0:
            Binv = np.linalg.inv(M[:, basis])
            xn = np.where(is_basic, 0.0, x)
            x[basis] = -Binv @ (M @ xn)

        y = cost[basis] @ Binv
        d = cost - y @ M
        can_inc = nonbasic_mask & (d < -tol_d) & (x < hi)
        can_dec = nonbasic_mask & (d > tol_d) & (x > lo)
        cand = can_inc | can_dec
        if not cand.any():
            return "optimal", it
        if bland:
            j = int(np.flatnonzero(cand)[0])
        else:
            j = int(np.argmax(np.where(cand, np.abs(d), -1.0)))
        direction = 1.0 if can_inc[j] else -1.0

        alpha = Binv @ M[:, j]
        rate = -direction * alpha                 # d x_B / d theta
        xb = x[basis]
        lob, hib = lo[basis], hi[basis]
        ratios = np.full(m, np.inf)
        down = rate < -tol_piv
        up = rate > tol_piv
        with np.errstate(invalid="ignore"):
            ratios[down] = (xb[down] - lob[down]) / -rate[down]
            ratios[up] = (hib[up] - xb[up]) / rate[up]
        ratios = np.maximum(ratios, 0.0)

        theta_flip = hi[j] - lo[j]
        r = -1
        theta = theta_flip
        if m:
            rmin = float(ratios.min())
            if rmin < theta_flip:
                theta = rmin
                ties = np.flatnonzero(ratios <= rmin + 1e-12)
                if bland:
                    r = int(ties[np.argmin(np.asarray(basis)[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(rate[ties]))])
        if not math.isfinite(theta):
            return "unbounded", it

        x[basis] = xb + theta * rate
        if r < 0:
            x[j] = hi[j] if direction > 0 else lo[j]
        else:
            x[j] = x[j] + direction * theta
            leaving = basis[r]
            x[leaving] = lo[leaving] if rate[r] < 0 else hi[leaving]
            piv = alpha[r]
            row = Binv[r] / piv
            Binv -= np.outer(alpha, row)
            Binv[r] = row
            basis[r] = j
            is_basic[leaving] = False
            is_basic[j] = True
            nonbasic_mask = ~is_basic

        if theta <= 1e-12:
            degenerate_run += 1
        else:
            degenerate_run = 0
        # Bland's rule while stalling guarantees termination under degeneracy
        bland = degenerate_run > _BLAND_AFTER
    raise SolverError(f"simplex iteration limit ({max_iter}) reached")


def solve_bounded_lp(c, A, row_lo, row_hi, lb, ub, *, tol: float = 1e-9,
                     max_iter: int | None = None) -> LpResult:
    c = np.asarray(c, dtype=float)
    if sparse.issparse(A):
        A = A.toarray()
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = c.size
    if A.size == 0:
        A = np.zeros((0, n))
    m = A.shape[0]
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    row_lo = np.asarray(row_lo, dtype=float)
    row_hi = np.asarray(row_hi, dtype=float)

    if np.any(lb > ub) or np.any(row_lo > row_hi):
        return LpResult("infeasible")

    lo = np.concatenate([lb, row_lo, np.zeros(m)])
    hi = np.concatenate([ub, row_hi, np.full(m, np.inf)])
    x = _initial_point(lo, hi)
    x[n + m:] = 0.0
    resid = x[n:n + m] - A @ x[:n]
    sign = np.where(resid >= 0, 1.0, -1.0)
    x[n + m:] = np.abs(resid)
    M = np.hstack([A, -np.eye(m), np.diag(sign)])
    basis = list(range(n + m, n + 2 * m))
    if max_iter is None:
        max_iter = 50 * (n + 2 * m) + 1000

    # phase I: drive artificials to zero
    iters = 0
    if m and x[n + m:].max() > 0:
        cost1 = np.zeros(n + 2 * m)
        cost1[n + m:] = 1.0
        status, it = _iterate(M, cost1, lo, hi, x, basis, tol_d=tol, tol_piv=tol,
                              max_iter=max_iter)
        iters += it
        infeas = float(x[n + m:].sum())
        scale = 1.0 + float(np.abs(resid).max())
        if infeas > 1e-7 * scale:
            return LpResult("infeasible", iterations=iters)
    # artificials stay in the basis only at (numerically) zero level
    hi[n + m:] = 0.0

    cost2 = np.zeros(n + 2 * m)
    cost2[:n] = c
    if m == 0:
        # no rows: each variable independently at its cheapest bound
        for j in range(n):
            if c[j] < 0:
                if not math.isfinite(ub[j]):
                    return LpResult("unbounded")
                x[j] = ub[j]
            elif c[j] > 0:
                if not math.isfinite(lb[j]):
                    return LpResult("unbounded")
                x[j] = lb[j]
        xs = x[:n].copy()
        return LpResult("optimal", xs, float(c @ xs), 0)

    status, it = _iterate(M, cost2, lo, hi, x, basis, tol_d=tol, tol_piv=tol,
                          max_iter=max_iter)
    iters += it
    if status == "unbounded":
        return LpResult("unbounded", iterations=iters)
    xs = np.clip(x[:n], lb, ub)
    return LpResult("optimal", xs, float(c @ xs), iters)
