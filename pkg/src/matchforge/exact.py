"""Exact baseline: minimum total travel with at most B blocking pairs, as one MIP.

Binary variables per admissible pair ``x`` (assigned), ``r`` (applicant prefers
this program to its outcome), ``w`` (program would take the applicant), ``a``
(blocking); ``z_i`` marks unmatched applicants and ``y_j`` programs below
capacity. The blocking-pair count of the returned matching is always recomputed
by the oracle; the MIP's ``a`` variables may overcount.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import opt
from .blocking import BlockingReport, count_blocking_pairs
from .core import Matching, ValidatedInstance
from .errors import InfeasibleBudget, ModelTooLarge, SolverFailure, SolverTimeLimit
from .opt import OptModel, Status

DEFAULT_MAX_PAIRS = 5000


@dataclass
class ExactResult:
    matching: Matching
    report: BlockingReport
    travel: float
    timed_out: bool = False
    mip_blocking_count: int = 0
    refined: bool = False


def build_exact_model(inst: ValidatedInstance, budget: int, n_min: int,
                      formulation: str = "chain"):
    """Stability constraints plus feasibility constraints, travel objective.

    ``formulation="direct"`` writes one ``w_ij >= x_kj`` row per applicant ``k``
    ranked below ``i`` by ``j``; ``"chain"`` links each ``w`` only to the next
    applicant down the program's list (``w_ij >= w_kj`` and ``w_ij >= x_kj``),
    which has the same integer solutions in O(|S|) rows.
    """
    S, I, J = inst.n_pairs, inst.n_applicants, inst.n_programs
    m = OptModel("exact")
    x = m.add_vars([f"x_{k}" for k in range(S)], kind="binary")
    z = m.add_vars([f"z_{i}" for i in range(I)], kind="binary")
    y = m.add_vars([f"y_{j}" for j in range(J)], kind="binary")
    r = m.add_vars([f"r_{k}" for k in range(S)], kind="binary")
    w = m.add_vars([f"w_{k}" for k in range(S)], kind="binary")
    a = m.add_vars([f"a_{k}" for k in range(S)], kind="binary")
    cap = inst.capacity.astype(float)

    m.add_rows([np.concatenate(([z[i]], x[inst.app_ptr[i]:inst.app_ptr[i + 1]])) for i in range(I)],
               [1.0] * I, "==", 1.0, [f"stu_unmatched_{i}" for i in range(I)])
    m.add_rows([np.concatenate(([y[j]], x[ks])) for j, ks in enumerate(inst.prog_pairs)],
               [1.0] * J, "<=", cap, [f"sch_under_capacity_lo_{j}" for j in range(J)])
    m.add_rows([np.concatenate(([y[j]], x[ks])) for j, ks in enumerate(inst.prog_pairs)],
               [np.concatenate(([-cap[j]], -np.ones(len(ks)))) for j, ks in enumerate(inst.prog_pairs)],
               "<=", -cap, [f"sch_under_capacity_hi_{j}" for j in range(J)])

    idx, coef, names = [], [], []
    for k in range(S):
        i = inst.pair_app[k]
        worse = x[k + 1:inst.app_ptr[i + 1]]
        idx.append(np.concatenate(([r[k], z[i]], worse)))
        coef.append(np.concatenate(([1.0, -1.0], -np.ones(len(worse)))))
        names.append(f"stu_unhappy_{k}")
    m.add_rows(idx, coef, "==", 0.0, names)

    m.add_rows([[w[k], y[inst.pair_prog[k]]] for k in range(S)], [[1.0, -1.0]] * S, ">=", 0.0,
               [f"sch_unhappy1_{k}" for k in range(S)])
    idx, coef, names = [], [], []
    for j, ks in enumerate(inst.prog_pairs):
        for pos, k in enumerate(ks):
            below = ks[pos + 1:]
            if formulation == "direct":
                for kb in below:
                    idx.append([w[k], x[kb]])
                    names.append(f"sch_unhappy2_{k}_{kb}")
            elif formulation == "chain":
                if len(below):
                    idx.append([w[k], x[below[0]]])
                    names.append(f"sch_unhappy2_{k}_{below[0]}")
                    idx.append([w[k], w[below[0]]])
                    names.append(f"sch_unhappy2_chain_{k}")
            else:
                raise ValueError(f"unknown formulation {formulation!r}")
    m.add_rows(idx, [[1.0, -1.0]] * len(idx), ">=", 0.0, names)
    idx, coef, names = [], [], []
    for j, ks in enumerate(inst.prog_pairs):
        for pos, k in enumerate(ks):
            below = ks[pos + 1:]
            idx.append(np.concatenate(([w[k], y[j]], x[below])))
            coef.append(np.concatenate(([1.0, -1.0], -np.ones(len(below)))))
            names.append(f"sch_unhappy3_{k}")
    m.add_rows(idx, coef, "<=", 0.0, names)

    m.add_rows([[r[k], w[k], a[k]] for k in range(S)], [[1.0, 1.0, -1.0]] * S, "<=", 1.0,
               [f"blocking_{k}" for k in range(S)])
    m.add_constraint((a, 1.0), "<=", float(budget), "blocking_number")

    m.add_rows([x[inst.app_ptr[i]:inst.app_ptr[i + 1]] for i in range(I)], [1.0] * I, "<=", 1.0,
               [f"unique_sch_{i}" for i in range(I)])
    m.add_rows([x[ks] for ks in inst.prog_pairs], [1.0] * J, "<=", cap,
               [f"capacity_{j}" for j in range(J)])
    m.add_constraint((x, 1.0), ">=", float(n_min), "min_matched")
    m.set_objective((x, inst.dist))
    return m, {"x": x, "z": z, "y": y, "r": r, "w": w, "a": a}


def solve_exact(inst: ValidatedInstance, budget: int, n_min: int,
                time_limit: float | None = None, gap: float = 0.0,
                max_pairs: int = DEFAULT_MAX_PAIRS, formulation: str = "chain",
                refine: bool = True, backend: str | None = None) -> ExactResult:
    """Travel-minimal matching with at most ``budget`` blocking pairs.

    With ``refine`` a second solve keeps travel at its optimum and minimises the
    blocking-pair count, so the reported count is the smallest achievable at
    that travel. It is skipped for ``budget == 0``.
    """
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    if inst.n_pairs > max_pairs:
        raise ModelTooLarge(f"{inst.n_pairs} admissible pairs exceed the cap of {max_pairs}")
    if n_min > min(inst.n_applicants, int(inst.capacity.sum())):
        raise InfeasibleBudget(f"cannot match {n_min} applicants")
    model, v = build_exact_model(inst, budget, n_min, formulation)
    sol = opt.solve(model, time_limit=time_limit, gap=gap, backend=backend)
    if sol.status is Status.INFEASIBLE:
        raise InfeasibleBudget(f"no matching of {n_min} applicants has at most {budget} blocking pairs")
    if sol.x is None:
        if sol.status is Status.TIME_LIMIT:
            raise SolverTimeLimit("exact method hit the time limit without an incumbent")
        raise SolverFailure(f"exact method ended with status {sol.status.value}")
    timed_out = sol.status is Status.TIME_LIMIT
    xv = np.round(sol.x[v["x"]])
    a_count = int(np.round(sol.x[v["a"]]).sum())
    refined = False
    if refine and budget > 0 and not timed_out:
        best = float(inst.dist @ xv)
        model.add_constraint((v["x"], inst.dist), "<=", best + 1e-9 * max(1.0, best),
                             "travel_optimum")
        model.set_objective((v["a"], 1.0))
        sol2 = opt.solve(model, time_limit=time_limit, gap=gap, backend=backend)
        if sol2.x is not None:
            xv = np.round(sol2.x[v["x"]])
            a_count = int(np.round(sol2.x[v["a"]]).sum())
            refined = True
            timed_out = sol2.status is Status.TIME_LIMIT
    match = Matching.from_pair_vector(inst, xv)
    return ExactResult(match, count_blocking_pairs(inst, match), float(inst.dist @ xv),
                       timed_out, a_count, refined)
