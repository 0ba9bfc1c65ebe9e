import numpy as np
import pytest
from scipy.optimize import linprog

from matchforge.blocking import count_blocking_pairs
from matchforge.core import total_travel
from matchforge.da import student_proposing_da
from matchforge.errors import InfeasibleBudget, ModelTooLarge
from matchforge.exact import build_exact_model, solve_exact

from conftest import all_matchings, brute_force_blocking, small_school


def brute_exact(inst, B, N):
    best = None
    for m in all_matchings(inst):
        if m.matched_count >= N and len(brute_force_blocking(inst, m)) <= B:
            t = total_travel(inst, m)
            best = t if best is None else min(best, t)
    return best


def test_b0_unique_instance_returns_da(unique_2x2):
    res = solve_exact(unique_2x2, 0, 2)
    assert res.matching == student_proposing_da(unique_2x2)
    assert res.report.count == 0


def test_too_many_required():
    inst = small_school(10, 3, 0, rank_range=(1, 3))
    with pytest.raises(InfeasibleBudget):
        solve_exact(inst, 0, int(inst.capacity.sum()) + 1)


def test_size_cap():
    inst = small_school(30, 4, 0, rank_range=(2, 4))
    with pytest.raises(ModelTooLarge):
        solve_exact(inst, 0, 0, max_pairs=inst.n_pairs - 1)


def test_negative_budget():
    inst = small_school(5, 2, 0, rank_range=(1, 2))
    with pytest.raises(ValueError):
        solve_exact(inst, -1, 0)


@pytest.mark.parametrize("seed", range(4))
def test_matches_enumeration(seed):
    inst = small_school(5, 3, seed, rank_range=(1, 3), total_capacity_factor=0.8)
    N = student_proposing_da(inst).matched_count
    for B in (0, 1, 2):
        want = brute_exact(inst, B, N)
        res = solve_exact(inst, B, N)
        assert res.travel == pytest.approx(want, abs=1e-9)
        assert res.report.count <= B


def test_large_budget_equals_min_cost_assignment():
    inst = small_school(30, 4, 3, rank_range=(2, 4))
    N = student_proposing_da(inst).matched_count
    res = solve_exact(inst, inst.n_pairs, N)
    # Transportation LP with integral polytope as an independent oracle.
    S, I, J = inst.n_pairs, inst.n_applicants, inst.n_programs
    A = np.zeros((I + J + 1, S))
    A[inst.pair_app, np.arange(S)] = 1
    A[I + inst.pair_prog, np.arange(S)] = 1
    A[-1] = -1
    b = np.concatenate((np.ones(I), inst.capacity, [-N]))
    lp = linprog(inst.dist, A_ub=A, b_ub=b, bounds=(0, 1), method="highs")
    assert res.travel == pytest.approx(lp.fun, abs=1e-7)


def test_b0_stable_and_not_worse_than_da():
    inst = small_school(40, 4, 5, rank_range=(2, 4))
    da = student_proposing_da(inst)
    res = solve_exact(inst, 0, da.matched_count)
    assert count_blocking_pairs(inst, res.matching).count == 0
    assert res.travel <= total_travel(inst, da) + 1e-9


def test_monotone_in_budget_and_refined_count():
    inst = small_school(30, 4, 6, rank_range=(2, 4))
    N = student_proposing_da(inst).matched_count
    travels = []
    for B in range(0, 6):
        res = solve_exact(inst, B, N)
        assert res.report.count <= B
        assert res.report.count <= res.mip_blocking_count or res.mip_blocking_count == 0 or B == 0
        travels.append(res.travel)
    assert all(a >= b - 1e-9 for a, b in zip(travels, travels[1:]))


def test_chain_formulation_same_optimum():
    inst = small_school(25, 4, 7, rank_range=(2, 4))
    N = student_proposing_da(inst).matched_count
    for B in (0, 3):
        a = solve_exact(inst, B, N, formulation="direct")
        b = solve_exact(inst, B, N, formulation="chain")
        assert a.travel == pytest.approx(b.travel, abs=1e-9)


def test_model_names_deterministic():
    inst = small_school(10, 3, 1, rank_range=(1, 3))
    m1, _ = build_exact_model(inst, 2, 5)
    m2, _ = build_exact_model(inst, 2, 5)
    assert m1.row_names == m2.row_names
    assert m1.to_lp_string() == m2.to_lp_string()
    for prefix in ("stu_unmatched", "sch_under_capacity_lo", "stu_unhappy", "sch_unhappy1",
                   "sch_unhappy2", "sch_unhappy3", "blocking_", "blocking_number", "unique_sch",
                   "capacity_", "min_matched"):
        assert any(n.startswith(prefix) for n in m1.row_names)
