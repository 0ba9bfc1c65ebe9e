"""Shared fixtures and brute-force oracles for the test suite."""

import itertools

import numpy as np
import pytest

from matchforge.core import Matching, build_instance, validate_instance
from matchforge.synth import GenConfig, gen_school_instance


def brute_force_blocking(inst, m):
    """Blocking pairs by the definition, scanning every (applicant, program) cell."""
    out = []
    for i in range(inst.n_applicants):
        for j in range(inst.n_programs):
            k = inst.pair_index.get((i, j))
            if k is None:
                continue
            cur = m.assignment[i]
            if cur >= 0 and inst.p[inst.pair_index[(i, int(cur))]] >= inst.p[k]:
                continue
            roster = [a for a in range(inst.n_applicants) if m.assignment[a] == j]
            if len(roster) < inst.capacity[j] or any(
                    inst.q[k] > inst.q[inst.pair_index[(a, j)]] for a in roster):
                out.append((i, j))
    return out


def all_matchings(inst):
    """Every feasible matching of a tiny instance."""
    options = [[-1] + list(inst.preference_list(i)) for i in range(inst.n_applicants)]
    for combo in itertools.product(*options):
        fill = np.bincount([j for j in combo if j >= 0], minlength=inst.n_programs)
        if np.all(fill <= inst.capacity):
            yield Matching(inst.n_applicants, inst.n_programs, combo)


def stable_matchings(inst):
    return [m for m in all_matchings(inst) if not brute_force_blocking(inst, m)]


def random_matching(inst, rng, fill_prob=0.8):
    """Random feasible matching: applicants in random order take a random open program."""
    m = Matching.empty(inst)
    fill = np.zeros(inst.n_programs, dtype=int)
    for i in rng.permutation(inst.n_applicants):
        if rng.random() > fill_prob:
            continue
        opts = [int(j) for j in inst.preference_list(i) if fill[j] < inst.capacity[j]]
        if opts:
            j = opts[rng.integers(len(opts))]
            m.assign(int(i), j)
            fill[j] += 1
    return m


def small_school(n, m, seed, **kw):
    kw.setdefault("rank_range", (min(2, m), min(9, m)))
    return validate_instance(gen_school_instance(GenConfig(n, m, seed=seed, **kw)))


@pytest.fixture
def unique_2x2():
    # s1: a > b, s2: a > b; a: s2 > s1, b: s1 > s2. Unique stable: s1-b, s2-a.
    return build_instance([1, 1], [[1, 0], [0, 1]], [[0, 1], [0, 1]],
                          distance=[[3.0, 1.0], [2.0, 4.0]])


@pytest.fixture
def cycle_2x2():
    # s1: a > b, s2: b > a; a: s2 > s1, b: s1 > s2. Two stable matchings.
    return build_instance([1, 1], [[1, 0], [0, 1]], [[0, 1], [1, 0]],
                          distance=[[1.0, 2.0], [2.0, 1.0]])


@pytest.fixture
def one_by_one():
    return build_instance([1], [[0]], [[0]], distance=[[2.0]])
