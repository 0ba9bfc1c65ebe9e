"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``. The large-market criteria
(7 to 11) take up to a few minutes each on one core.
"""

import math
import time
from decimal import Decimal, getcontext

import numpy as np
import pytest
from scipy.stats import spearmanr

from matchforge import cli
from matchforge.blocking import (count_blocking_pairs, l1_distance, lipschitz_bound,
                                 rural_hospitals_audit)
from matchforge.core import total_travel, validate_instance
from matchforge.da import program_proposing_da, student_proposing_da
from matchforge.errors import HypothesisViolated
from matchforge.exact import solve_exact
from matchforge.forward import couples_colocated, solve_residency
from matchforge.inverse import certificate_residuals, forward_lp_gap, recover_cost
from matchforge.metrics import tail_bound
from matchforge.pipeline import (compare_exact_inverse, run_pipeline, sweep_min_matched,
                                 sweep_travel, travel_grid, weight_grid)
from matchforge.synth import GenConfig, gen_residency_instance, gen_school_instance

from conftest import brute_force_blocking, random_matching, small_school

COARSE = weight_grid((0.0, 0.5, 1.0))


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {n:2d} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def fifty_instances():
    out = []
    for s in range(50):
        m = 3 + s % 8
        n = 60 + 9 * s
        out.append(small_school(n, m, s, rank_range=(min(2, m), min(9, m))))
    return out


@pytest.fixture(scope="module")
def fifty():
    return fifty_instances()


@pytest.fixture(scope="module")
def big():
    """Default 1000x20 market with its DA matching and recovered cost."""
    t = time.perf_counter()
    inst = validate_instance(gen_school_instance(GenConfig()))
    da = student_proposing_da(inst)
    cv = recover_cost(inst, da)
    return inst, da, cv, time.perf_counter() - t


def test_01_da_stability(fifty, capsys):
    t = time.perf_counter()
    worst = 0
    for inst in fifty:
        for m in (student_proposing_da(inst), program_proposing_da(inst)):
            worst = max(worst, count_blocking_pairs(inst, m).count)
    dt = time.perf_counter() - t
    report(capsys, 1, worst == 0 and dt < 5,
           f"max BP over 100 DA outputs = {worst}, {dt:.2f}s (< 5s)")


def test_02_rural_hospitals(fifty, capsys):
    bad = [k for k, inst in enumerate(fifty) if not rural_hospitals_audit(inst).ok]
    report(capsys, 2, not bad, f"{50 - len(bad)}/50 instances pass the audit")


def test_03_oracle_equivalence(capsys):
    rng = np.random.default_rng(2024)
    mismatches = 0
    for t in range(200):
        n, m = int(rng.integers(1, 31)), int(rng.integers(1, 7))
        inst = small_school(n, m, 1000 + t, rank_range=(1, m))
        x = random_matching(inst, rng, fill_prob=float(rng.uniform(0.2, 1.0)))
        fast = count_blocking_pairs(inst, x)
        slow = brute_force_blocking(inst, x)
        if fast.count != len(slow) or sorted(fast.pairs) != sorted(slow):
            mismatches += 1
    report(capsys, 3, mismatches == 0, f"{mismatches} mismatches over 200 pairs")


def test_04_exact_budget_zero(capsys):
    t = time.perf_counter()
    fails = []
    for s in range(10):
        inst = small_school(50, 5, s, rank_range=(2, 5))
        da = student_proposing_da(inst)
        ex = solve_exact(inst, 0, da.matched_count)
        bp = count_blocking_pairs(inst, ex.matching).count
        if bp != 0 or ex.travel > total_travel(inst, da) + 1e-9:
            fails.append(s)
    dt = time.perf_counter() - t
    report(capsys, 4, not fails and dt < 120,
           f"failing seeds {fails}, {dt:.1f}s (< 120s)")


def test_05_exact_monotone(capsys):
    inst = small_school(50, 5, 7, rank_range=(2, 5))
    n = student_proposing_da(inst).matched_count
    travel = [solve_exact(inst, B, n).travel for B in range(11)]
    ok = all(b <= a for a, b in zip(travel, travel[1:]))
    report(capsys, 5, ok, "travel over B=0..10: " + ", ".join(f"{v:.3f}" for v in travel))


def test_06_inverse_certificate(capsys):
    worst = dict.fromkeys(("normalization", "dual_feasibility", "complementary_slackness",
                           "duality_gap", "forward_gap"), 0.0)
    for s in range(20):
        n, m = 40 + 8 * s, 3 + s % 5
        inst = small_school(n, m, 300 + s, rank_range=(2, m))
        da = student_proposing_da(inst)
        cv = recover_cost(inst, da)
        r = certificate_residuals(inst, da, cv)
        r["forward_gap"] = forward_lp_gap(inst, cv, da)
        for k in worst:
            worst[k] = max(worst[k], r[k])
    tol = {"normalization": 1e-8, "dual_feasibility": 1e-8, "complementary_slackness": 1e-8,
           "duality_gap": 1e-6, "forward_gap": 1e-6}
    ok = all(worst[k] <= tol[k] for k in tol)
    report(capsys, 6, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_07_exact_vs_inverse(capsys):
    t = time.perf_counter()
    inst = validate_instance(gen_school_instance(GenConfig(200, 7, seed=1, rank_range=(2, 7))))
    budgets = [int(round(f * inst.n_pairs)) for f in (0.0, 0.02, 0.05, 0.10)]
    rows = compare_exact_inverse(inst, budgets)
    dt = time.perf_counter() - t
    ok = dt < 1800 and all(r["status"] == "ok" for r in rows)
    ok = ok and all(0 <= r["gap_pct_points"] <= 2.0 for r in rows)
    detail = "; ".join(f"B={r['budget']} exact {r.get('exact_bp_pct', math.nan):.2f}% "
                       f"inverse {r.get('inverse_bp_pct', math.nan):.2f}%" for r in rows)
    report(capsys, 7, ok, f"{detail}; {dt:.0f}s (< 1800s)")


def test_08_feasibility_anchor(big, capsys):
    inst, da, cv, setup = big
    t = time.perf_counter()
    res = run_pipeline(inst, grid=COARSE, x_ref=da, cost=cv)
    dt = setup + time.perf_counter() - t
    pct = 100 * res.metrics.bp_pct
    report(capsys, 8, pct <= 1.0 and dt < 600, f"BP {pct:.3f}% of |S|, {dt:.0f}s (< 600s)")


def test_09_tradeoff_direction(big, capsys):
    inst, da, cv, _ = big
    rows = sweep_travel(inst, travel_grid(inst, da, [1.0, 0.98, 0.96, 0.94, 0.92]),
                        grid=COARSE, x_ref=da, cost=cv)[1:]
    rows = [r for r in rows if r["status"] == "ok"]
    red = [r["travel_reduction_pct"] for r in rows]
    bp = [r["bp_pct"] for r in rows]
    rho = spearmanr(red, bp).statistic if len(set(bp)) > 1 and len(set(red)) > 1 else 1.0
    hit = any(r >= 5.0 and b <= 5.0 for r, b in zip(red, bp))
    pts = ", ".join(f"({r:.2f}%, {b:.2f}%)" for r, b in zip(red, bp))
    report(capsys, 9, len(rows) == 5 and rho >= 0 and hit,
           f"spearman {rho:.3f}; (reduction, BP) = {pts}")


def test_10_matched_flexibility(big, capsys):
    inst, da, cv, _ = big
    n = da.matched_count + math.ceil(0.01 * inst.n_applicants)
    spare = min(int(inst.capacity.sum()), inst.n_applicants)
    assert n <= spare, "instance has no spare capacity"
    row = sweep_min_matched(inst, [n], grid=COARSE, x_ref=da, cost=cv)[1]
    ok = row["status"] == "ok" and row["matched"] >= n and row["bp_pct"] <= 5.0
    report(capsys, 10, ok,
           f"N={n}, matched {row.get('matched')}, BP {row.get('bp_pct', math.nan):.2f}%")


def test_11_residency_couples(capsys):
    t = time.perf_counter()
    inst = validate_instance(gen_residency_instance(GenConfig(1000, 20, couples_count=120)))
    da = student_proposing_da(inst)
    base = couples_colocated(inst, da)
    target = math.ceil(1.1 * base)
    res = run_pipeline(inst, mode="residency", couples_target=target, grid=COARSE, x_ref=da)
    got = res.metrics.couples_same_location
    # Re-solve the chosen triple to audit the y variables.
    fr = solve_residency(inst, res.cost, res.weights, da.matched_count, target, time_limit=30)
    a = fr.matching.assignment
    audit = all(y == int(a[i] == j and a[k] == j) for (i, k, j), y in fr.y.items())
    audit = audit and fr.couples_from_y == couples_colocated(inst, fr.matching)
    dt = time.perf_counter() - t
    pct = 100 * res.metrics.bp_pct
    ok = got >= target and pct <= 10.0 and audit and dt < 900
    report(capsys, 11, ok, f"DA couples {base}, target {target}, got {got}, BP {pct:.2f}%, "
           f"y audit {'exact' if audit else 'broken'}, {dt:.0f}s (< 900s)")


def test_12_lipschitz_empirical(capsys):
    inst = small_school(30, 5, 12, rank_range=(2, 5))
    L = lipschitz_bound(inst)
    rng = np.random.default_rng(12)
    viol = 0
    for _ in range(1000):
        x, y = random_matching(inst, rng), random_matching(inst, rng)
        d = abs(count_blocking_pairs(inst, x).count - count_blocking_pairs(inst, y).count)
        viol += d > L * l1_distance(inst, x, y)
    report(capsys, 12, viol == 0, f"{viol} violations in 1000 pairs (constant {L})")


def test_13_tail_bound(capsys):
    getcontext().prec = 60
    rng = np.random.default_rng(13)
    worst, rejected = 0.0, 0
    for _ in range(100):
        L, s, n = rng.uniform(0.1, 5), rng.uniform(0.01, 2), int(rng.integers(1, 10**5))
        eps = L * s * math.sqrt(n) + rng.uniform(1e-3, 6) * L * s
        D = Decimal
        ref = (-((D(eps) - D(L) * D(s) * D(n).sqrt()) ** 2)
               / (2 * D(L) ** 2 * D(s) ** 2)).exp()
        worst = max(worst, abs(D(tail_bound(eps, s, L, n)) - ref) / ref)
        try:
            tail_bound(L * s * math.sqrt(n) * rng.uniform(0, 1), s, L, n)
        except HypothesisViolated:
            rejected += 1
    ok = worst <= Decimal("1e-12") and rejected == 100
    report(capsys, 13, ok, f"max rel error {float(worst):.2e}, {rejected}/100 invalid rejected")


def test_14_determinism(tmp_path, capsys):
    def run(*argv):
        return cli.main([str(a) for a in argv])

    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("gen", "--students", 150, "--schools", 6, "--seed", 4, "-o", a)
    run("gen", "--students", 150, "--schools", 6, "--seed", 4, "-o", b)
    same = [a.read_bytes() == b.read_bytes()]
    res = tmp_path / "res.json"
    run("gen", "--students", 150, "--schools", 6, "--seed", 4, "--couples", 20, "-o", res)
    cases = [(a, ["--kind", "travel", "--fractions", "1,0.97,0.94"]),
             (a, ["--kind", "min-matched", "--values", "100,110"]),
             (res, ["--kind", "couples", "--values", "2,4"])]
    for k, (inst, extra) in enumerate(cases):
        outs = []
        for rep in range(2):
            out = tmp_path / f"sweep{k}_{rep}.csv"
            code = run("sweep", inst, *extra, "--grid-levels", "0,0.5,1", "-o", out)
            outs.append(out.read_bytes() if code == 0 else None)
        same.append(outs[0] is not None and outs[0] == outs[1])
    report(capsys, 14, all(same), f"gen identical {same[0]}, sweep CSVs identical {same[1:]}")
