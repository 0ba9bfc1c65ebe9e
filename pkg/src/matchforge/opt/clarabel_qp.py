"""Convex QPs through Clarabel's interior-point method.

Preferred over HiGHS's active-set QP, whose null-space grows with the number of
unpenalised variables and stalls on the inverse problems built here.
"""

from __future__ import annotations

import time

import numpy as np
import scipy.sparse as sp

from ..errors import MalformedModel
from .model import OptModel, OptSolution, Status

try:
    import clarabel
except ImportError:  # pragma: no cover
    clarabel = None

NAME = "clarabel"


def available() -> bool:
    return clarabel is not None


def solve(model: OptModel, time_limit: float | None = None) -> OptSolution:
    if model.is_mip:
        raise MalformedModel("Clarabel route handles continuous models only")
    sign = 1.0 if model.sense == "min" else -1.0
    n = model.n_vars
    A = model.matrix().tocsr()
    lo, hi = np.asarray(model.row_lo), np.asarray(model.row_hi)
    lb, ub = np.asarray(model.lb), np.asarray(model.ub)
    eye = sp.identity(n, format="csr")
    eq = lo == hi
    le = ~eq & np.isfinite(hi)
    ge = ~eq & np.isfinite(lo)
    fin_ub, fin_lb = np.isfinite(ub), np.isfinite(lb)
    blocks = [A[eq], A[le], -A[ge], eye[fin_ub], -eye[fin_lb]]
    rhs = [lo[eq], hi[le], -lo[ge], ub[fin_ub], -lb[fin_lb]]
    Ac = sp.vstack(blocks).tocsc()
    bc = np.concatenate(rhs)
    n_eq = int(eq.sum())
    cones = []
    if n_eq:
        cones.append(clarabel.ZeroConeT(n_eq))
    if Ac.shape[0] - n_eq:
        cones.append(clarabel.NonnegativeConeT(Ac.shape[0] - n_eq))
    P = sp.triu(sign * model.hessian(), format="csc")
    q = sign * model.cost_vector()

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = 1e-10
    settings.tol_gap_rel = 1e-10
    settings.tol_feas = 1e-10
    settings.max_iter = 500
    if time_limit is not None:
        settings.time_limit = float(time_limit)
    t0 = time.perf_counter()
    res = clarabel.DefaultSolver(P, q, Ac, bc, cones, settings).solve()
    wall = time.perf_counter() - t0
    name = str(res.status)
    if name in ("Solved", "AlmostSolved"):
        status = Status.OPTIMAL
    elif "PrimalInfeasible" in name:
        status = Status.INFEASIBLE
    elif "DualInfeasible" in name:
        status = Status.UNBOUNDED
    elif "Time" in name:
        status = Status.TIME_LIMIT
    else:
        status = Status.ERROR
    sol = OptSolution(status=status, wall_time=wall, backend=NAME, info={"clarabel_status": name})
    if status is Status.OPTIMAL:
        sol.x = np.asarray(res.x, dtype=float)
        sol.objective = float(0.5 * sign * sol.x @ (model.hessian() @ sol.x)
                              + model.cost_vector() @ sol.x + model.obj_const)
    return sol
