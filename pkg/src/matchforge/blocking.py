"""Stability ground truth: blocking pairs, the Lipschitz constant, Rural Hospitals audit."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import UNMATCHED, Matching, ValidatedInstance, check_feasible
from .da import program_proposing_da, student_proposing_da


@dataclass
class BlockingReport:
    count: int
    pairs: list[tuple[int, int]]
    pct_of_admissible: float

    def to_json_dict(self, inst: ValidatedInstance | None = None) -> dict:
        d = asdict(self)
        if inst is not None:
            d["pairs"] = [[inst.applicant_ids[i], inst.program_ids[j]] for i, j in self.pairs]
        else:
            d["pairs"] = [list(p) for p in self.pairs]
        return d


def _current_utility(inst: ValidatedInstance, m: Matching) -> np.ndarray:
    """Applicant utility of the current match, -inf when unmatched."""
    util = np.full(inst.n_applicants, -np.inf)
    for i, j in m.pairs():
        util[i] = inst.p[inst.pair(i, j)]
    return util


def _program_thresholds(inst: ValidatedInstance, m: Matching) -> np.ndarray:
    """Lowest program utility among admitted applicants; -inf if under capacity."""
    worst = np.full(inst.n_programs, np.inf)
    for i, j in m.pairs():
        worst[j] = min(worst[j], inst.q[inst.pair(i, j)])
    worst[m.recompute_fill() < inst.capacity] = -np.inf
    return worst


def blocking_mask(inst: ValidatedInstance, m: Matching) -> np.ndarray:
    """Boolean mask over S of pairs that block ``m``."""
    app_side = inst.p > _current_utility(inst, m)[inst.pair_app]
    prog_side = inst.q > _program_thresholds(inst, m)[inst.pair_prog]
    return app_side & prog_side


def is_blocking_pair(inst: ValidatedInstance, m: Matching, i: int, j: int) -> bool:
    k = inst.pair(i, j)
    cur = m.assignment[i]
    unhappy_app = cur == UNMATCHED or inst.p[k] > inst.p[inst.pair(i, int(cur))]
    if not unhappy_app:
        return False
    admitted = np.flatnonzero(m.assignment == j)
    if len(admitted) < inst.capacity[j]:
        return True
    return any(inst.q[k] > inst.q[inst.pair(int(a), j)] for a in admitted)


def count_blocking_pairs(inst: ValidatedInstance, m: Matching) -> BlockingReport:
    """Exact blocking-pair count in O(|S| + sum_j C_j)."""
    check_feasible(inst, m)
    mask = blocking_mask(inst, m)
    ks = np.flatnonzero(mask)
    pairs = [(int(inst.pair_app[k]), int(inst.pair_prog[k])) for k in ks]
    pct = len(ks) / inst.n_pairs if inst.n_pairs else 0.0
    return BlockingReport(len(ks), pairs, pct)


def lipschitz_bound(inst: ValidatedInstance) -> float:
    return 0.5 * (inst.p_max + 2 * inst.c_max)


def l1_distance(inst: ValidatedInstance, a: Matching, b: Matching) -> int:
    """||x - x'||_1 over the 0/1 pair encoding; a reassignment counts 2."""
    return int(np.abs(a.pair_vector(inst) - b.pair_vector(inst)).sum())


@dataclass
class RuralHospitalsReport:
    same_matched_set: bool
    same_fills: bool
    same_undercapacity_rosters: bool
    identical: bool
    student_optimal: Matching
    program_optimal: Matching

    @property
    def ok(self) -> bool:
        return self.same_matched_set and self.same_fills and self.same_undercapacity_rosters


def rural_hospitals_audit(inst: ValidatedInstance) -> RuralHospitalsReport:
    ms = student_proposing_da(inst)
    mp = program_proposing_da(inst)
    matched_s = ms.assignment != UNMATCHED
    matched_p = mp.assignment != UNMATCHED
    fill_s, fill_p = ms.recompute_fill(), mp.recompute_fill()
    same_rosters = True
    for j in np.flatnonzero(fill_s < inst.capacity):
        if not np.array_equal(np.flatnonzero(ms.assignment == j),
                              np.flatnonzero(mp.assignment == j)):
            same_rosters = False
    for j in np.flatnonzero(fill_p < inst.capacity):
        if not np.array_equal(np.flatnonzero(ms.assignment == j),
                              np.flatnonzero(mp.assignment == j)):
            same_rosters = False
    return RuralHospitalsReport(
        same_matched_set=bool(np.array_equal(matched_s, matched_p)),
        same_fills=bool(np.array_equal(fill_s, fill_p)),
        same_undercapacity_rosters=same_rosters,
        identical=ms == mp,
        student_optimal=ms,
        program_optimal=mp,
    )
