import numpy as np
import pytest

from matchforge.blocking import count_blocking_pairs, rural_hospitals_audit
from matchforge.core import Matching, build_instance
from matchforge.da import program_proposing_da, student_proposing_da

from conftest import small_school, stable_matchings


@pytest.mark.parametrize("da", [student_proposing_da, program_proposing_da])
def test_one_by_one(da, one_by_one):
    assert da(one_by_one).pairs() == [(0, 0)]


@pytest.mark.parametrize("da", [student_proposing_da, program_proposing_da])
def test_unique_2x2(da, unique_2x2):
    # s1 -> b, s2 -> a
    assert da(unique_2x2).pairs() == [(0, 1), (1, 0)]
    assert len(stable_matchings(unique_2x2)) == 1


def test_capacity_two_takes_both():
    inst = build_instance([2], [[0], [0]], [[1, 0]])
    assert student_proposing_da(inst).matched_count == 2


def test_cycle_student_and_program_optimal(cycle_2x2):
    stable = stable_matchings(cycle_2x2)
    assert sorted(m.pairs() for m in stable) == [[(0, 0), (1, 1)], [(0, 1), (1, 0)]]
    # Applicants get their first choices: a -> s2, b -> s1.
    assert student_proposing_da(cycle_2x2).pairs() == [(0, 1), (1, 0)]
    # Programs get their first choices: s1 -> a, s2 -> b.
    assert program_proposing_da(cycle_2x2).pairs() == [(0, 0), (1, 1)]


def test_empty_lists_leave_unmatched():
    inst = build_instance([1], [[0], []], [[0]])
    assert student_proposing_da(inst).assignment.tolist() == [0, -1]


def test_zero_capacity_program():
    inst = build_instance([0, 1], [[0, 1], [0, 1]], [[0, 1], [1, 0]])
    m = student_proposing_da(inst)
    assert m.assignment.tolist() == [-1, 1]
    assert count_blocking_pairs(inst, m).count == 0


@pytest.mark.parametrize("seed", range(10))
def test_stable_on_random_instances(seed):
    inst = small_school(150, 6, seed, total_capacity_factor=0.9)
    for m in (student_proposing_da(inst), program_proposing_da(inst)):
        assert count_blocking_pairs(inst, m).count == 0
    assert rural_hospitals_audit(inst).ok


@pytest.mark.parametrize("seed", range(5))
def test_proposer_optimality_against_enumeration(seed):
    inst = small_school(6, 3, seed, total_capacity_factor=0.7, rank_range=(1, 3))
    stable = stable_matchings(inst)
    ms, mp = student_proposing_da(inst), program_proposing_da(inst)
    assert ms in stable and mp in stable
    for m in stable:
        for i in range(inst.n_applicants):
            if ms.assignment[i] >= 0 and m.assignment[i] >= 0:
                assert inst.p[inst.pair(i, ms.assignment[i])] >= inst.p[inst.pair(i, m.assignment[i])]


def test_idempotent_on_restriction():
    inst = small_school(200, 7, 3)
    m = student_proposing_da(inst)
    sub = inst.restrict(m.pair_indices(inst))
    assert student_proposing_da(sub) == m


def test_deterministic():
    inst = small_school(200, 7, 2)
    assert np.array_equal(student_proposing_da(inst).assignment,
                          student_proposing_da(inst).assignment)
