import numpy as np
import pytest

from matchforge.blocking import count_blocking_pairs
from matchforge.core import total_travel
from matchforge.da import student_proposing_da
from matchforge.errors import AllInfeasible
from matchforge.forward import WeightTriple
from matchforge.inverse import recover_cost
from matchforge.metrics import table_to_csv
from matchforge.pipeline import (COMPARE_COLUMNS, SWEEP_COLUMNS, compare_exact_inverse,
                                 grid_search_lambda, run_pipeline, sweep_min_matched,
                                 sweep_travel, travel_grid, weight_grid)

from conftest import small_school

COARSE = weight_grid((0.0, 0.5, 1.0))


@pytest.fixture(scope="module")
def market():
    inst = small_school(120, 6, 3)
    da = student_proposing_da(inst)
    return inst, da, recover_cost(inst, da)


def test_weight_grid_sizes():
    assert len(weight_grid()) == 124
    assert len(COARSE) == 26
    assert WeightTriple(0, 0, 0.5) == COARSE[0]


def test_one_by_one_returns_da(one_by_one):
    res = run_pipeline(one_by_one, grid=COARSE)
    assert res.matching == student_proposing_da(one_by_one)
    assert res.metrics.bp_count == 0


def test_single_triple_grid(market):
    inst, da, cv = market
    w = WeightTriple(0.25, 1, 0)
    res = grid_search_lambda(inst, cv, da.matched_count, total_travel(inst, da), [w])
    assert res.weights == w


def test_proportional_duplicate_tie_break(market):
    inst, da, cv = market
    T = total_travel(inst, da)
    grid = [WeightTriple(1, 0, 0), WeightTriple(0.5, 0, 0)]
    a = grid_search_lambda(inst, cv, da.matched_count, T, grid)
    b = grid_search_lambda(inst, cv, da.matched_count, T, list(reversed(grid)))
    assert a.weights == b.weights == WeightTriple(0.5, 0, 0)
    assert a.matching == b.matching


def test_grid_choice_is_minimum(market):
    inst, da, cv = market
    T = 0.97 * total_travel(inst, da)
    res = grid_search_lambda(inst, cv, da.matched_count, T, COARSE)
    best = count_blocking_pairs(inst, res.matching).count
    for p in res.points:
        if p.ok:
            assert best <= p.bp_count
            assert p.bp_count == count_blocking_pairs(inst, p.matching).count


def test_all_infeasible(market):
    inst, da, cv = market
    with pytest.raises(AllInfeasible):
        grid_search_lambda(inst, cv, da.matched_count, 0.0, COARSE[:3])


def test_jobs_do_not_change_result(market):
    inst, da, cv = market
    T = 0.98 * total_travel(inst, da)
    a = grid_search_lambda(inst, cv, da.matched_count, T, COARSE[:6], jobs=1)
    b = grid_search_lambda(inst, cv, da.matched_count, T, COARSE[:6], jobs=2)
    assert a.weights == b.weights and a.matching == b.matching


def test_pipeline_at_da_targets(market):
    inst, da, cv = market
    res = run_pipeline(inst, grid=COARSE, cost=cv)
    assert res.metrics.bp_pct <= 0.01
    assert res.metrics.total_travel <= total_travel(inst, da) + 1e-6
    assert res.matching.matched_count >= da.matched_count


def test_alternative_reference(market):
    inst, da, _ = market
    from matchforge.da import program_proposing_da
    ref = program_proposing_da(inst)
    res = run_pipeline(inst, grid=COARSE[:4], x_ref=ref)
    assert res.reference is ref
    assert res.target == total_travel(inst, ref)


def test_sweep_single_da_target(market):
    inst, da, cv = market
    rows = sweep_travel(inst, [total_travel(inst, da)], grid=COARSE, x_ref=da, cost=cv)
    assert [r["label"] for r in rows] == ["da", "travel"]
    assert rows[0]["travel_reduction_pct"] == 0.0
    assert rows[1]["travel_reduction_pct"] >= -1e-9


def test_sweep_travel_respects_targets(market):
    inst, da, cv = market
    targets = travel_grid(inst, da, [1.0, 0.98, 0.96])
    rows = sweep_travel(inst, targets, grid=COARSE, x_ref=da, cost=cv)[1:]
    for r, t in zip(rows, targets):
        assert r["status"] == "ok"
        assert r["total_travel"] <= t + 1e-6


def test_sweep_min_matched(market):
    inst, da, cv = market
    cap = int(inst.capacity.sum())
    spare = min(cap, inst.n_applicants) - da.matched_count
    ns = [da.matched_count, da.matched_count + min(2, spare), cap + 1]
    rows = sweep_min_matched(inst, ns, grid=COARSE, x_ref=da, cost=cv)[1:]
    assert rows[0]["bp_pct"] <= 1.0
    assert rows[1]["matched"] >= ns[1]
    assert rows[2]["status"] == "infeasible" and "bp_count" not in rows[2]


def test_compare_small():
    inst = small_school(40, 4, 1, rank_range=(2, 4))
    B = [0, 2, 4]
    rows = compare_exact_inverse(inst, B, grid=COARSE)
    assert [r["budget"] for r in rows] == B
    assert rows[0]["exact_bp_count"] == 0
    for r in rows:
        assert r["status"] == "ok"
        assert r["exact_bp_count"] <= r["budget"]
        assert r["inverse_bp_count"] >= r["exact_bp_count"]
        assert r["inverse_travel"] <= r["exact_travel"] * (1 + 1e-9) + 1e-9


def test_sweep_csv_deterministic(market):
    inst, da, cv = market
    targets = travel_grid(inst, da, [1.0, 0.97])
    a = table_to_csv(sweep_travel(inst, targets, grid=COARSE, x_ref=da, cost=cv), SWEEP_COLUMNS)
    b = table_to_csv(sweep_travel(inst, targets, grid=COARSE, x_ref=da, cost=cv), SWEEP_COLUMNS)
    assert a == b
    assert a.splitlines()[0] == ",".join(SWEEP_COLUMNS)
    assert set(COMPARE_COLUMNS) >= {"budget", "gap_pct_points"}


def test_sweep_heterogeneity_rows():
    from matchforge.pipeline import HETEROGENEITY_COLUMNS, sweep_heterogeneity
    from matchforge.synth import GenConfig
    cfg = GenConfig(40, 4, seed=2, rank_range=(2, 4))
    rows = sweep_heterogeneity(cfg, [0.0, 1.0], [0.5], grid=COARSE[:4])
    assert [(r["phi"], r["label"]) for r in rows] == [(0.0, "da"), (0.0, "travel"),
                                                      (1.0, "da"), (1.0, "travel")]
    assert table_to_csv(rows, HETEROGENEITY_COLUMNS).count("\n") == 5
