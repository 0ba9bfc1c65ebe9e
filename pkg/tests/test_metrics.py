import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from matchforge.core import Matching, build_instance
from matchforge.da import student_proposing_da
from matchforge.errors import HypothesisViolated
from matchforge.metrics import (MetricsReport, compute_metrics, emit_csv, emit_json,
                                format_value, load_report, table_to_csv, tail_bound)

from conftest import small_school


def test_empty_matching(unique_2x2):
    rep = compute_metrics(unique_2x2, Matching.empty(unique_2x2))
    assert rep.matched_count == 0 and rep.unmatched_count == 2
    assert rep.rank_histogram == {}
    assert rep.bp_count == unique_2x2.n_pairs
    assert rep.avg_travel_miles == 0.0


def test_self_baseline_zero_reduction():
    inst = small_school(100, 5, 1, rank_range=(2, 5))
    da = student_proposing_da(inst)
    rep = compute_metrics(inst, da, baseline=da)
    assert rep.travel_reduction_pct == 0.0


def test_first_choice_histogram():
    inst = build_instance([1, 1], [[0, 1], [1, 0]], [[0, 1], [1, 0]])
    rep = compute_metrics(inst, Matching.from_pairs(inst, [(0, 0), (1, 1)]))
    assert rep.rank_histogram == {1: 2}


def test_report_invariants():
    inst = small_school(200, 7, 2, rank_range=(2, 7))
    rep = compute_metrics(inst, student_proposing_da(inst))
    assert rep.matched_count + rep.unmatched_count == inst.n_applicants
    assert sum(rep.rank_histogram.values()) == rep.matched_count
    assert rep.bp_pct == rep.bp_count / inst.n_pairs
    assert rep.avg_travel_miles == pytest.approx(rep.total_travel / rep.matched_count)


def test_histogram_invariant_under_program_relabel():
    a = build_instance([1, 1, 1], [[0, 1], [1, 2], [2, 0]], [[0, 2], [0, 1], [1, 2]])
    # Same market with programs 0 and 2 swapped.
    b = build_instance([1, 1, 1], [[2, 1], [1, 0], [0, 2]], [[1, 2], [0, 1], [0, 2]])
    ha = compute_metrics(a, student_proposing_da(a)).rank_histogram
    hb = compute_metrics(b, student_proposing_da(b)).rank_histogram
    assert ha == hb


def test_tail_bound_examples():
    assert tail_bound(4.0, 1.0, 1.0, 4) == pytest.approx(math.exp(-2), rel=1e-15)
    assert tail_bound(4.0, 1.0, 1.0, 4) == pytest.approx(0.135335, abs=1e-6)
    assert tail_bound(2.0 + 1e-9, 1.0, 1.0, 4) == pytest.approx(1.0)
    with pytest.raises(HypothesisViolated):
        tail_bound(2.0, 1.0, 1.0, 4)
    with pytest.raises(HypothesisViolated):
        tail_bound(1.0, 1.0, 1.0, 4)


def test_tail_bound_high_precision():
    getcontext().prec = 50
    rng = np.random.default_rng(3)
    for _ in range(50):
        L, s, n = rng.uniform(0.1, 5), rng.uniform(0.01, 2), int(rng.integers(1, 10000))
        thr = L * s * math.sqrt(n)
        eps = thr + rng.uniform(1e-3, 5) * L * s
        D = Decimal
        ref = (-((D(eps) - D(L) * D(s) * D(n).sqrt()) ** 2) / (2 * D(L) ** 2 * D(s) ** 2)).exp()
        assert abs(tail_bound(eps, s, L, n) - float(ref)) <= 1e-12 * float(ref)


def test_format_value():
    assert format_value(1.23456789) == "1.23457"
    assert format_value(3) == "3"
    assert format_value(None) == ""
    assert format_value(True) == "true"
    assert format_value(-0.0) == "0"


def test_emit_csv_stable(tmp_path):
    rows = [{"b": 2.0, "a": 1}, {"a": 3, "b": 1 / 3}]
    p1, p2 = tmp_path / "1.csv", tmp_path / "2.csv"
    emit_csv(rows, ["a", "b"], p1)
    emit_csv(rows, ["a", "b"], p2)
    assert p1.read_bytes() == p2.read_bytes() == b"a,b\n1,2\n3,0.333333\n"


def test_empty_table_header_only(tmp_path):
    assert table_to_csv([], ["x", "y"]) == "x,y\n"


def test_json_roundtrip(tmp_path):
    inst = small_school(100, 5, 1, rank_range=(2, 5))
    da = student_proposing_da(inst)
    rep = compute_metrics(inst, da, baseline=da)
    p = tmp_path / "r.json"
    emit_json(rep, p)
    first = p.read_bytes()
    assert load_report(p) == rep
    emit_json(rep, p)
    assert p.read_bytes() == first
    assert isinstance(load_report(p), MetricsReport)
