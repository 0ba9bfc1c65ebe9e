"""scipy.optimize backend: ``linprog`` for LPs (with marginals), ``milp`` for MIPs.

No quadratic objectives; callers needing a QP get :class:`BackendUnavailable`.
"""

from __future__ import annotations

import time

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from ..errors import BackendUnavailable
from .model import OptModel, OptSolution, Status

NAME = "scipy"


def available() -> bool:
    return True


def solve(model: OptModel, time_limit: float | None = None, gap: float = 1e-6) -> OptSolution:
    if model.is_qp:
        raise BackendUnavailable("the scipy backend has no QP support")
    A = model.matrix()
    c = model.cost_vector()
    sign = 1.0 if model.sense == "min" else -1.0
    lo, hi = np.asarray(model.row_lo), np.asarray(model.row_hi)
    lb, ub = np.asarray(model.lb), np.asarray(model.ub)
    t0 = time.perf_counter()
    if model.is_mip:
        opts = {"mip_rel_gap": gap, "disp": False}
        if time_limit is not None:
            opts["time_limit"] = time_limit
        cons = [LinearConstraint(A, lo, hi)] if model.n_rows else []
        res = milp(sign * c, constraints=cons, integrality=np.asarray(model.binary, dtype=int),
                   bounds=Bounds(lb, ub), options=opts)
        wall = time.perf_counter() - t0
        status = {0: Status.OPTIMAL, 1: Status.TIME_LIMIT, 2: Status.INFEASIBLE,
                  3: Status.UNBOUNDED}.get(res.status, Status.ERROR)
        sol = OptSolution(status=status, wall_time=wall, backend=NAME,
                          info={"message": res.message})
        if res.x is not None:
            sol.x = np.asarray(res.x)
            sol.objective = float(c @ sol.x) + model.obj_const
            sol.gap = getattr(res, "mip_gap", None)
        return sol

    eq = lo == hi
    le = ~eq & np.isfinite(hi)
    ge = ~eq & np.isfinite(lo)
    parts, rhs = [], []
    if le.any():
        parts.append(A[le]); rhs.append(hi[le])
    if ge.any():
        parts.append(-A[ge]); rhs.append(-lo[ge])
    A_ub = sp.vstack(parts).tocsr() if parts else None
    b_ub = np.concatenate(rhs) if rhs else None
    opts = {"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9}
    if time_limit is not None:
        opts["time_limit"] = time_limit
    res = linprog(sign * c, A_ub=A_ub, b_ub=b_ub, A_eq=A[eq] if eq.any() else None,
                  b_eq=lo[eq] if eq.any() else None, bounds=list(zip(lb, ub)),
                  method="highs", options=opts)
    wall = time.perf_counter() - t0
    status = {0: Status.OPTIMAL, 1: Status.TIME_LIMIT, 2: Status.INFEASIBLE,
              3: Status.UNBOUNDED}.get(res.status, Status.ERROR)
    sol = OptSolution(status=status, wall_time=wall, backend=NAME, info={"message": res.message})
    if status is Status.OPTIMAL:
        sol.x = np.asarray(res.x)
        sol.objective = float(c @ sol.x) + model.obj_const
        y = np.zeros(model.n_rows)
        n_le = int(le.sum())
        if A_ub is not None:
            m = np.asarray(res.ineqlin.marginals)
            y[le] = m[:n_le]
            y[ge] = -m[n_le:]
        if eq.any():
            y[eq] = np.asarray(res.eqlin.marginals)
        sol.row_duals = sign * y
        sol.col_duals = sign * (np.asarray(res.lower.marginals) + np.asarray(res.upper.marginals))
    return sol
