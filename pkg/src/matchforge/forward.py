"""Multi-objective forward assignment given a recovered stability cost vector.

Objective over admissible pairs:

    l1 * b*_ij  -  l2 * (applicant rank fraction)  -  l3 * (program rank fraction)

subject to the assignment constraints, a minimum matched count, and either a
total-travel cap (school choice) or a minimum number of co-located couples
(residency).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import opt
from .core import Matching, ValidatedInstance
from .errors import InfeasibleTarget, SolverFailure, SolverTimeLimit
from .inverse import CostVector
from .opt import OptModel, Status


@dataclass(frozen=True, order=True)
class WeightTriple:
    l1: float
    l2: float
    l3: float

    def __post_init__(self):
        if min(self.l1, self.l2, self.l3) < 0:
            raise ValueError("weights must be nonnegative")
        if self.l1 == self.l2 == self.l3 == 0:
            raise ValueError("at least one weight must be positive")

    @classmethod
    def parse(cls, text: str) -> "WeightTriple":
        parts = [float(t) for t in text.split(",")]
        if len(parts) != 3:
            raise ValueError("weights must be given as l1,l2,l3")
        return cls(*parts)

    def __str__(self) -> str:
        return f"{self.l1:g},{self.l2:g},{self.l3:g}"


@dataclass
class ForwardResult:
    matching: Matching
    weights: WeightTriple
    objective: float
    timed_out: bool = False
    travel: float = 0.0
    # Activity of the travel row as the solver saw it (sum d x at the MIP point).
    travel_row_activity: float | None = None
    couples_from_y: int | None = None
    y: dict = field(default_factory=dict)


def _cost_array(inst: ValidatedInstance, cost) -> np.ndarray:
    b = cost.b if isinstance(cost, CostVector) else np.asarray(cost, dtype=float)
    if b.shape != (inst.n_pairs,):
        raise ValueError("cost vector must be indexed exactly by the admissible pairs")
    return b


def objective_coefficients(inst: ValidatedInstance, cost, wts: WeightTriple) -> np.ndarray:
    b = _cost_array(inst, cost)
    return wts.l1 * b - wts.l2 * inst.rank_frac_app - wts.l3 * inst.rank_frac_prog


def assignment_model(inst: ValidatedInstance, coef: np.ndarray, n_min: int, name: str):
    m = OptModel(name)
    x = m.add_vars([f"x_{k}" for k in range(inst.n_pairs)], kind="binary")
    m.add_rows([x[inst.app_ptr[i]:inst.app_ptr[i + 1]] for i in range(inst.n_applicants)],
               [1.0] * inst.n_applicants, "<=", 1.0,
               [f"unique_{i}" for i in range(inst.n_applicants)])
    m.add_rows([x[ks] for ks in inst.prog_pairs], [1.0] * inst.n_programs, "<=",
               inst.capacity.astype(float), [f"capacity_{j}" for j in range(inst.n_programs)])
    m.add_constraint((x, 1.0), ">=", float(n_min), "min_matched")
    m.set_objective((x, coef))
    return m, x


def _check_n(inst: ValidatedInstance, n_min: int) -> None:
    if n_min > min(inst.n_applicants, int(inst.capacity.sum())):
        raise InfeasibleTarget(f"cannot match {n_min} applicants with total capacity "
                               f"{int(inst.capacity.sum())} and {inst.n_applicants} applicants")


def _run(inst, model, x, wts, time_limit, gap, backend):
    sol = opt.solve(model, time_limit=time_limit, gap=gap, backend=backend)
    if sol.status is Status.INFEASIBLE:
        raise InfeasibleTarget(f"{model.name}: no assignment meets the targets")
    if sol.status is Status.TIME_LIMIT and sol.x is None:
        raise SolverTimeLimit(f"{model.name}: time limit reached without an incumbent")
    if sol.x is None:
        raise SolverFailure(f"{model.name}: solver status {sol.status.value}")
    xv = np.round(sol.x[x])
    match = Matching.from_pair_vector(inst, xv)
    res = ForwardResult(match, wts, float(sol.objective), sol.status is Status.TIME_LIMIT)
    res.travel = float(inst.dist @ xv)
    return res, sol


def solve_school(inst: ValidatedInstance, cost, wts: WeightTriple, n_min: int,
                 travel_target: float = float("inf"), time_limit: float | None = None,
                 gap: float = 1e-6, backend: str | None = None) -> ForwardResult:
    """Weighted assignment with total travel at most ``travel_target`` miles."""
    _check_n(inst, n_min)
    model, x = assignment_model(inst, objective_coefficients(inst, cost, wts), n_min,
                                "forward_school")
    if np.isfinite(travel_target):
        if travel_target < 0:
            raise InfeasibleTarget("travel target must be nonnegative")
        model.add_constraint((x, inst.dist), "<=", float(travel_target), "strict_travel")
    res, sol = _run(inst, model, x, wts, time_limit, gap, backend)
    if np.isfinite(travel_target):
        res.travel_row_activity = float(inst.dist @ np.round(sol.x[x]))
    return res


def solve_residency(inst: ValidatedInstance, cost, wts: WeightTriple, n_min: int,
                    couples_target: int = 0, time_limit: float | None = None,
                    gap: float = 1e-6, backend: str | None = None) -> ForwardResult:
    """Weighted assignment with at least ``couples_target`` couples co-located.

    Each unordered couple contributes once per shared program, so the target
    counts couples, not people.
    """
    _check_n(inst, n_min)
    couples = inst.couples
    if couples_target > len(couples):
        raise InfeasibleTarget(f"couples target {couples_target} exceeds the "
                               f"{len(couples)} couples in the instance")
    model, x = assignment_model(inst, objective_coefficients(inst, cost, wts), n_min,
                                "forward_residency")
    triples = []
    for a, b in couples:
        for k in range(inst.app_ptr[a], inst.app_ptr[a + 1]):
            j = int(inst.pair_prog[k])
            kb = inst.pair_index.get((b, j))
            if kb is not None:
                triples.append((a, b, j, k, kb))
    if triples:
        y = model.add_vars([f"y_{a}_{b}_{j}" for a, b, j, _, _ in triples], kind="binary")
        xa = np.array([t[3] for t in triples])
        xb = np.array([t[4] for t in triples])
        n = len(triples)
        model.add_rows([[y[t], x[xa[t]]] for t in range(n)], [[1.0, -1.0]] * n, "<=", 0.0,
                       [f"couple_lo_a_{t}" for t in range(n)])
        model.add_rows([[y[t], x[xb[t]]] for t in range(n)], [[1.0, -1.0]] * n, "<=", 0.0,
                       [f"couple_lo_b_{t}" for t in range(n)])
        model.add_rows([[y[t], x[xa[t]], x[xb[t]]] for t in range(n)], [[1.0, -1.0, -1.0]] * n,
                       ">=", -1.0, [f"couple_hi_{t}" for t in range(n)])
        model.add_constraint((y, 1.0), ">=", float(couples_target), "couple")
    elif couples_target > 0:
        raise InfeasibleTarget("no couple shares an admissible program")
    res, sol = _run(inst, model, x, wts, time_limit, gap, backend)
    if triples:
        yv = np.round(sol.x[y])
        res.y = {(a, b, j): int(val) for (a, b, j, _, _), val in zip(triples, yv)}
        res.couples_from_y = int(yv.sum())
    else:
        res.couples_from_y = 0
    return res


def couples_colocated(inst: ValidatedInstance, m: Matching) -> int:
    """Couples whose two members hold the same program."""
    return sum(1 for a, b in inst.couples
               if m.assignment[a] >= 0 and m.assignment[a] == m.assignment[b])
