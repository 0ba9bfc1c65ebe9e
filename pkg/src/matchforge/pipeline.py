"""End-to-end runs and experiment harnesses.

One run is: deferred acceptance for the stable reference, inverse recovery of
``b*`` around it, then the forward assignment (travel cap or couples target),
optionally with a search over objective weights. Sweeps repeat the last stage
over a grid of targets and write rows whose blocking counts always come from
the oracle.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .blocking import count_blocking_pairs
from .core import Matching, ValidatedInstance, total_travel, validate_instance
from .da import student_proposing_da
from .errors import AllInfeasible, Infeasible, SolverFailure, SolverTimeLimit
from .exact import solve_exact
from .forward import WeightTriple, couples_colocated, solve_residency, solve_school
from .inverse import CostVector, recover_cost
from .metrics import MetricsReport, average_travel, compute_metrics
from .synth import GenConfig, gen_school_instance

DEFAULT_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)
COARSE_LEVELS = (0.0, 0.5, 1.0)
# Per-solve limit inside grid searches; a timed-out solve keeps its incumbent.
DEFAULT_SOLVE_LIMIT = 30.0


def weight_grid(levels: Sequence[float] = DEFAULT_LEVELS) -> list[WeightTriple]:
    """Cube ``levels**3`` without the all-zero triple, in lexicographic order."""
    return [WeightTriple(*t) for t in itertools.product(sorted(set(levels)), repeat=3)
            if any(t)]


def _direction(w: WeightTriple) -> tuple:
    top = max(w.l1, w.l2, w.l3)
    return tuple(round(c / top, 12) for c in (w.l1, w.l2, w.l3))


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _map(fn: Callable, args: list[tuple], jobs: int | None) -> list:
    """Ordered map, in-process for one job, otherwise over a process pool."""
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    if jobs == 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=min(jobs, len(args))) as pool:
        futures = [pool.submit(fn, *a) for a in args]
        return [f.result() for f in futures]


# ----------------------------------------------------------------- grid search
@dataclass
class GridPoint:
    weights: WeightTriple
    matching: Matching | None = None
    bp_count: int | None = None
    travel: float | None = None
    timed_out: bool = False
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.matching is not None


@dataclass
class GridSearchResult:
    weights: WeightTriple
    matching: Matching
    points: list[GridPoint]

    def __iter__(self):
        return iter((self.weights, self.matching))


def _forward(inst, b, wts, mode, n_min, target, time_limit, backend):
    if mode == "school":
        return solve_school(inst, b, wts, n_min, travel_target=target,
                            time_limit=time_limit, backend=backend)
    if mode == "residency":
        return solve_residency(inst, b, wts, n_min, couples_target=int(target),
                               time_limit=time_limit, backend=backend)
    raise ValueError(f"unknown mode {mode!r}")


def _evaluate_point(inst, b, wts, mode, n_min, target, time_limit, backend) -> GridPoint:
    try:
        res = _forward(inst, b, wts, mode, n_min, target, time_limit, backend)
    except (Infeasible, SolverFailure) as exc:
        return GridPoint(wts, error=f"{type(exc).__name__}: {exc}")
    return GridPoint(wts, res.matching, count_blocking_pairs(inst, res.matching).count,
                     total_travel(inst, res.matching), res.timed_out)


def grid_search_lambda(inst: ValidatedInstance, cost, n_min: int, target: float = math.inf,
                       grid: Iterable[WeightTriple] | None = None, mode: str = "school",
                       time_limit: float | None = DEFAULT_SOLVE_LIMIT,
                       backend: str | None = None, jobs: int | None = 1) -> GridSearchResult:
    """Solve the forward problem for every weight triple and keep the best.

    Best means fewest oracle blocking pairs, then lowest travel, then the
    lexicographically smallest triple. Proportional triples pose the same
    problem, so only one solve is made per direction.
    """
    grid = sorted(set(weight_grid() if grid is None else grid))
    if not grid:
        raise ValueError("weight grid is empty")
    b = cost.b if isinstance(cost, CostVector) else np.asarray(cost, dtype=float)
    reps: dict[tuple, WeightTriple] = {}
    for w in grid:
        reps.setdefault(_direction(w), w)
    solved = _map(_evaluate_point,
                  [(inst, b, w, mode, n_min, target, time_limit, backend) for w in reps.values()],
                  jobs)
    by_dir = {d: p for d, p in zip(reps, solved)}
    points = []
    for w in grid:
        p = by_dir[_direction(w)]
        points.append(GridPoint(w, p.matching, p.bp_count, p.travel, p.timed_out, p.error))
    ok = [p for p in points if p.ok]
    if not ok:
        raise AllInfeasible("no weight triple produced an assignment: "
                            + "; ".join(sorted({p.error for p in points if p.error})))
    best = min(ok, key=lambda p: (p.bp_count, p.travel, p.weights))
    return GridSearchResult(best.weights, best.matching, points)


# ------------------------------------------------------------------ algorithm
@dataclass
class PipelineResult:
    matching: Matching
    metrics: MetricsReport
    weights: WeightTriple
    cost: CostVector
    reference: Matching
    target: float
    n_min: int
    timed_out: bool = False
    points: list[GridPoint] = field(default_factory=list)

    def __iter__(self):
        return iter((self.matching, self.metrics))


def run_pipeline(inst: ValidatedInstance, mode: str = "school",
                   travel_target: float | None = None, couples_target: int | None = None,
                   n_min: int | None = None, weights: WeightTriple | None = None,
                   grid: Iterable[WeightTriple] | None = None, x_ref: Matching | None = None,
                   cost: CostVector | None = None, lambda_reg: float = 1.0,
                   time_limit: float | None = DEFAULT_SOLVE_LIMIT, backend: str | None = None,
                   jobs: int | None = 1) -> PipelineResult:
    """DA (or a supplied stable ``x_ref``), then ``b*``, then the forward solve.

    The travel target defaults to the reference travel and ``n_min`` to its
    matched count. A fixed ``weights`` triple skips the grid search.
    """
    ref = student_proposing_da(inst) if x_ref is None else x_ref
    if cost is None:
        cost = recover_cost(inst, ref, lambda_reg=lambda_reg, backend=backend)
    n = ref.matched_count if n_min is None else int(n_min)
    if mode == "school":
        target = total_travel(inst, ref) if travel_target is None else float(travel_target)
    elif mode == "residency":
        target = couples_colocated(inst, ref) if couples_target is None else int(couples_target)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    search = grid_search_lambda(inst, cost, n, target, [weights] if weights else grid, mode,
                                time_limit, backend, jobs)
    point = next(p for p in search.points if p.weights == search.weights)
    metrics = compute_metrics(inst, search.matching, baseline=ref)
    return PipelineResult(search.matching, metrics, search.weights, cost, ref, target, n,
                            point.timed_out, search.points)


# --------------------------------------------------------------------- sweeps
SWEEP_COLUMNS = ("label", "target", "min_matched", "status", "weights", "matched",
                 "bp_count", "bp_pct", "avg_travel_miles", "total_travel",
                 "travel_reduction_pct", "couples_same_location", "timed_out")


def _row(inst, label, target, n_min, m: Matching | None, ref: Matching, status="ok",
         weights=None, timed_out=False) -> dict:
    row = {"label": label, "target": target, "min_matched": n_min, "status": status,
           "weights": "" if weights is None else str(weights), "timed_out": timed_out}
    if m is not None:
        met = compute_metrics(inst, m, baseline=ref)
        row.update(matched=met.matched_count, bp_count=met.bp_count, bp_pct=100.0 * met.bp_pct,
                   avg_travel_miles=met.avg_travel_miles, total_travel=met.total_travel,
                   travel_reduction_pct=met.travel_reduction_pct,
                   couples_same_location=met.couples_same_location)
    return row


def _sweep(inst, label, mode, targets, n_mins, ref, cost, grid, time_limit, backend, jobs):
    rows = [_row(inst, "da", None, ref.matched_count, ref, ref)]
    for target, n in zip(targets, n_mins):
        try:
            res = grid_search_lambda(inst, cost, n, target, grid, mode, time_limit, backend, jobs)
        except AllInfeasible as exc:
            status = "infeasible" if "Infeasible" in str(exc) else "failed"
            rows.append(_row(inst, label, target, n, None, ref, status))
            continue
        point = next(p for p in res.points if p.weights == res.weights)
        rows.append(_row(inst, label, target, n, res.matching, ref, weights=res.weights,
                         timed_out=point.timed_out))
    return rows


def _prepare(inst, x_ref, cost, backend):
    ref = student_proposing_da(inst) if x_ref is None else x_ref
    if cost is None:
        cost = recover_cost(inst, ref, backend=backend)
    return ref, cost


def travel_grid(inst: ValidatedInstance, ref: Matching, fractions: Sequence[float]) -> list[float]:
    """Travel targets as fractions of the reference travel."""
    base = total_travel(inst, ref)
    return [base * f for f in fractions]


def sweep_travel(inst: ValidatedInstance, t_grid: Sequence[float], n_min: int | None = None,
                 grid: Iterable[WeightTriple] | None = None, x_ref: Matching | None = None,
                 cost: CostVector | None = None, time_limit: float | None = DEFAULT_SOLVE_LIMIT,
                 backend: str | None = None, jobs: int | None = 1) -> list[dict]:
    """One row per travel target, plus the DA reference row."""
    ref, cost = _prepare(inst, x_ref, cost, backend)
    n = ref.matched_count if n_min is None else n_min
    return _sweep(inst, "travel", "school", list(t_grid), [n] * len(t_grid), ref, cost,
                  grid, time_limit, backend, jobs)


def sweep_min_matched(inst: ValidatedInstance, n_grid: Sequence[int],
                      travel_target: float | None = None,
                      grid: Iterable[WeightTriple] | None = None, x_ref: Matching | None = None,
                      cost: CostVector | None = None,
                      time_limit: float | None = DEFAULT_SOLVE_LIMIT,
                      backend: str | None = None, jobs: int | None = 1) -> list[dict]:
    """One row per minimum matched count with the travel target fixed."""
    ref, cost = _prepare(inst, x_ref, cost, backend)
    t = total_travel(inst, ref) if travel_target is None else travel_target
    return _sweep(inst, "min_matched", "school", [t] * len(n_grid), [int(n) for n in n_grid],
                  ref, cost, grid, time_limit, backend, jobs)


def sweep_couples(inst: ValidatedInstance, c_grid: Sequence[int], n_min: int | None = None,
                  grid: Iterable[WeightTriple] | None = None, x_ref: Matching | None = None,
                  cost: CostVector | None = None, time_limit: float | None = DEFAULT_SOLVE_LIMIT,
                  backend: str | None = None, jobs: int | None = 1) -> list[dict]:
    """Residency sweep over couples targets."""
    ref, cost = _prepare(inst, x_ref, cost, backend)
    n = ref.matched_count if n_min is None else n_min
    return _sweep(inst, "couples", "residency", [int(c) for c in c_grid], [n] * len(c_grid),
                  ref, cost, grid, time_limit, backend, jobs)


HETEROGENEITY_COLUMNS = ("phi", "mu") + SWEEP_COLUMNS


def sweep_heterogeneity(cfg: GenConfig, phis: Sequence[float], mus: Sequence[float],
                        travel_fraction: float = 0.95, grid: Iterable[WeightTriple] | None = None,
                        time_limit: float | None = DEFAULT_SOLVE_LIMIT,
                        backend: str | None = None, jobs: int | None = 1) -> list[dict]:
    """Travel cut at ``travel_fraction`` of DA travel across preference mixes."""
    rows = []
    for phi, mu in itertools.product(phis, mus):
        c = dataclasses.replace(cfg, phi_values=(phi,), mu=mu)
        inst = validate_instance(gen_school_instance(c))
        ref, cost = _prepare(inst, None, None, backend)
        sub = sweep_travel(inst, travel_grid(inst, ref, [travel_fraction]), grid=grid,
                           x_ref=ref, cost=cost, time_limit=time_limit, backend=backend,
                           jobs=jobs)
        for r in sub:
            rows.append({"phi": phi, "mu": mu, **r})
    return rows


COMPARE_COLUMNS = ("budget", "status", "exact_travel", "exact_bp_count", "exact_bp_pct",
                   "inverse_travel", "inverse_bp_count", "inverse_bp_pct", "gap_pct_points",
                   "weights", "matched", "exact_timed_out", "inverse_timed_out")


def compare_exact_inverse(inst: ValidatedInstance, b_grid: Sequence[int],
                          n_min: int | None = None, grid: Iterable[WeightTriple] | None = None,
                          exact_time_limit: float | None = None,
                          time_limit: float | None = DEFAULT_SOLVE_LIMIT,
                          formulation: str = "chain", backend: str | None = None,
                          jobs: int | None = 1) -> list[dict]:
    """For each budget B: exact travel optimum, then the inverse pipeline at that travel."""
    ref, cost = _prepare(inst, None, None, backend)
    n = ref.matched_count if n_min is None else n_min
    rows = []
    for B in b_grid:
        row = {"budget": int(B), "matched": n}
        try:
            ex = solve_exact(inst, int(B), n, time_limit=exact_time_limit,
                             formulation=formulation, backend=backend)
        except Infeasible:
            rows.append({**row, "status": "infeasible"})
            continue
        except SolverTimeLimit:
            rows.append({**row, "status": "time_limit", "exact_timed_out": True})
            continue
        row.update(exact_travel=ex.travel, exact_bp_count=ex.report.count,
                   exact_bp_pct=100.0 * ex.report.pct_of_admissible,
                   exact_timed_out=ex.timed_out)
        try:
            res = grid_search_lambda(inst, cost, n, ex.travel * (1 + 1e-12), grid, "school",
                                     time_limit, backend, jobs)
        except AllInfeasible:
            rows.append({**row, "status": "inverse_infeasible"})
            continue
        point = next(p for p in res.points if p.weights == res.weights)
        rep = count_blocking_pairs(inst, res.matching)
        row.update(status="ok", inverse_travel=total_travel(inst, res.matching),
                   inverse_bp_count=rep.count, inverse_bp_pct=100.0 * rep.pct_of_admissible,
                   weights=str(res.weights), inverse_timed_out=point.timed_out)
        row["gap_pct_points"] = row["inverse_bp_pct"] - row["exact_bp_pct"]
        rows.append(row)
    return rows


def da_summary(inst: ValidatedInstance) -> dict:
    m = student_proposing_da(inst)
    return {"matched": m.matched_count, "total_travel": total_travel(inst, m),
            "avg_travel_miles": average_travel(inst, m)}


__all__ = [
    "PipelineResult", "COMPARE_COLUMNS", "GridPoint", "GridSearchResult",
    "HETEROGENEITY_COLUMNS", "SWEEP_COLUMNS", "compare_exact_inverse", "grid_search_lambda",
    "run_pipeline", "sweep_couples", "sweep_heterogeneity", "sweep_min_matched",
    "sweep_travel", "travel_grid", "weight_grid"
]
