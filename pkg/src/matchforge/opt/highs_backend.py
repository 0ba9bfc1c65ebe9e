"""HiGHS through its native Python binding (LP with duals, MIP, convex QP)."""

from __future__ import annotations

import time

import numpy as np

from ..errors import BackendUnavailable, MalformedModel
from .model import OptModel, OptSolution, Status

try:
    import highspy
except ImportError:  # pragma: no cover - exercised only without the wheel
    highspy = None

NAME = "highs"


def available() -> bool:
    return highspy is not None


def solve(model: OptModel, time_limit: float | None = None, gap: float = 1e-6) -> OptSolution:
    if highspy is None:
        raise BackendUnavailable("highspy is not installed")
    if model.is_qp and model.is_mip:
        raise MalformedModel("mixed-integer QP is not supported")
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", 1)
    h.setOptionValue("random_seed", 0)
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    h.setOptionValue("dual_feasibility_tolerance", 1e-9)
    h.setOptionValue("mip_rel_gap", float(gap))
    h.setOptionValue("mip_abs_gap", 1e-9)
    h.setOptionValue("mip_feasibility_tolerance", 1e-9)
    if time_limit is not None:
        h.setOptionValue("time_limit", float(time_limit))

    A = model.matrix().tocsc()
    lp = highspy.HighsLp()
    lp.num_col_ = model.n_vars
    lp.num_row_ = model.n_rows
    lp.col_cost_ = model.cost_vector()
    lp.col_lower_ = np.asarray(model.lb, dtype=float)
    lp.col_upper_ = np.asarray(model.ub, dtype=float)
    lp.row_lower_ = np.asarray(model.row_lo, dtype=float)
    lp.row_upper_ = np.asarray(model.row_hi, dtype=float)
    lp.offset_ = model.obj_const
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = A.indptr.astype(np.int32)
    lp.a_matrix_.index_ = A.indices.astype(np.int32)
    lp.a_matrix_.value_ = A.data.astype(float)
    lp.sense_ = highspy.ObjSense.kMinimize if model.sense == "min" else highspy.ObjSense.kMaximize
    if model.is_mip:
        lp.integrality_ = [highspy.HighsVarType.kInteger if b else highspy.HighsVarType.kContinuous
                           for b in model.binary]
    h.passModel(lp)
    if model.is_qp:
        H = model.hessian()
        lower = _lower_triangle(H)
        h.passHessian(model.n_vars, lower.nnz, highspy.HessianFormat.kTriangular,
                      lower.indptr.astype(np.int32), lower.indices.astype(np.int32),
                      lower.data.astype(float))

    S = highspy.HighsModelStatus
    t0 = time.perf_counter()
    h.run()
    ms = h.getModelStatus()
    retried = False
    if ms == S.kSolveError and model.is_mip:
        # Presolve occasionally returns a point that violates a row after
        # postsolve; HiGHS flags it and the unpresolved solve is reliable.
        h.setOptionValue("presolve", "off")
        if time_limit is not None:
            h.setOptionValue("time_limit", max(1e-3, float(time_limit) - (time.perf_counter() - t0)))
        h.clearSolver()
        h.run()
        ms = h.getModelStatus()
        retried = True
    wall = time.perf_counter() - t0
    info = h.getInfo()
    status = {
        S.kOptimal: Status.OPTIMAL,
        S.kInfeasible: Status.INFEASIBLE,
        S.kUnbounded: Status.UNBOUNDED,
        S.kUnboundedOrInfeasible: Status.INFEASIBLE,
        S.kTimeLimit: Status.TIME_LIMIT,
    }.get(ms, Status.ERROR)
    if ms == S.kUnboundedOrInfeasible and not model.is_mip:
        status = _disambiguate(model, time_limit)
    sol = OptSolution(status=status, wall_time=wall, backend=NAME,
                      info={"highs_status": h.modelStatusToString(ms),
                                             "presolve_retry": retried})
    has_primal = info.primal_solution_status == 2  # kSolutionStatusFeasible
    if status is Status.OPTIMAL or (status is Status.TIME_LIMIT and has_primal):
        s = h.getSolution()
        sol.x = np.asarray(s.col_value, dtype=float)
        sol.objective = float(info.objective_function_value)
        if model.is_mip:
            sol.gap = float(info.mip_gap)
        elif status is Status.OPTIMAL and not model.is_qp:
            sol.row_duals = np.asarray(s.row_dual, dtype=float)
            sol.col_duals = np.asarray(s.col_dual, dtype=float)
        elif status is Status.OPTIMAL:
            sol.info["row_duals"] = np.asarray(s.row_dual, dtype=float)
    return sol


def _lower_triangle(H):
    import scipy.sparse as sp
    return sp.tril(H, format="csc")


def _disambiguate(model: OptModel, time_limit) -> Status:
    """Re-solve with a zero objective to tell infeasible from unbounded."""
    probe = OptModel(model.name + "_feas")
    probe.var_names, probe.lb, probe.ub = model.var_names, model.lb, model.ub
    probe.binary = model.binary
    probe.row_names, probe.row_lo, probe.row_hi = model.row_names, model.row_lo, model.row_hi
    probe._rows, probe._cols, probe._vals = model._rows, model._cols, model._vals
    res = solve(probe, time_limit=time_limit)
    return Status.UNBOUNDED if res.status is Status.OPTIMAL else Status.INFEASIBLE
