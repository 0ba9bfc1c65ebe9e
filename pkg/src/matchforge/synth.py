"""Seeded synthetic school-choice and residency instances.

Random streams: every entity draws from its own PCG64 generator seeded with
``SeedSequence(seed, spawn_key=(tag, index))`` where the tag is 0 for programs,
1 for applicants and 2 for couples. Draw order inside a stream is fixed, so an
entity's data does not depend on how many other entities exist or on the order
in which they are generated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Instance, Preference
from .errors import InfeasibleConfig

PROGRAM_STREAM, APPLICANT_STREAM, COUPLE_STREAM = 0, 1, 2
TIE_EPS = 1e-9


@dataclass
class GenConfig:
    n_applicants: int = 1000
    n_programs: int = 20
    total_capacity_factor: float = 1.0
    phi_values: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    mu: float = 0.75
    rank_range: tuple[int, int] = (2, 9)
    couples_count: int = 0
    seed: int = 0
    max_distance_miles: float = 15.0
    # Use +distance in both utility formulas instead of the closeness term.
    literal_distance_sign: bool = False

    def check(self) -> None:
        lo, hi = self.rank_range
        if self.n_applicants < 0 or self.n_programs < 1:
            raise InfeasibleConfig("need at least one program and a nonnegative applicant count")
        if not 1 <= lo <= hi <= self.n_programs:
            raise InfeasibleConfig(
                f"rank_range {self.rank_range} must lie within [1, {self.n_programs}]")
        if self.couples_count < 0 or self.couples_count % 2:
            raise InfeasibleConfig("couples_count must be an even nonnegative integer")
        if self.couples_count > self.n_applicants:
            raise InfeasibleConfig("couples_count exceeds n_applicants")
        if not self.phi_values or any(not 0 <= f <= 1 for f in self.phi_values):
            raise InfeasibleConfig("phi_values must be a nonempty subset of [0, 1]")
        if not 0 <= self.mu <= 1:
            raise InfeasibleConfig("mu must lie in [0, 1]")
        if self.total_capacity_factor < 0:
            raise InfeasibleConfig("total_capacity_factor must be nonnegative")


def _stream(seed: int, tag: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(tag, index))
    return np.random.Generator(np.random.PCG64(ss))


def _apportion(total: int, weights: np.ndarray) -> np.ndarray:
    """Largest-remainder split of ``total`` proportional to ``weights``."""
    raw = total * weights / weights.sum()
    base = np.floor(raw).astype(np.int64)
    rest = total - int(base.sum())
    order = np.lexsort((np.arange(len(raw)), -(raw - base)))
    base[order[:rest]] += 1
    return base


@dataclass
class _Draws:
    prog_xy: np.ndarray
    sqf: np.ndarray
    capacity: np.ndarray
    app_xy: np.ndarray
    phi: np.ndarray
    k: np.ndarray
    noise_app: np.ndarray
    noise_prog: np.ndarray
    couple_k: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def _draw(cfg: GenConfig) -> _Draws:
    side = cfg.max_distance_miles / math.sqrt(2.0)
    lo, hi = cfg.rank_range
    m, n = cfg.n_programs, cfg.n_applicants
    prog_xy, sqf, w = np.empty((m, 2)), np.empty(m), np.empty(m)
    for j in range(m):
        g = _stream(cfg.seed, PROGRAM_STREAM, j)
        prog_xy[j] = g.uniform(0.0, side, size=2)
        sqf[j] = g.uniform()
        w[j] = g.uniform(0.5, 1.5)
    app_xy, phi = np.empty((n, 2)), np.empty(n)
    k = np.empty(n, dtype=np.int64)
    noise_app, noise_prog = np.empty((n, m)), np.empty((n, m))
    for i in range(n):
        g = _stream(cfg.seed, APPLICANT_STREAM, i)
        app_xy[i] = g.uniform(0.0, side, size=2)
        phi[i] = cfg.phi_values[int(g.integers(len(cfg.phi_values)))]
        k[i] = g.integers(lo, hi + 1)
        noise_app[i] = g.uniform(size=m)
        noise_prog[i] = g.uniform(size=m)
    couple_k = np.array([_stream(cfg.seed, COUPLE_STREAM, c).integers(lo, hi + 1)
                         for c in range(cfg.couples_count // 2)], dtype=np.int64)
    capacity = _apportion(int(round(cfg.total_capacity_factor * n)), w)
    return _Draws(prog_xy, sqf, capacity, app_xy, phi, k, noise_app, noise_prog, couple_k)


def _utilities(cfg: GenConfig, d: _Draws):
    dist = np.linalg.norm(d.app_xy[:, None, :] - d.prog_xy[None, :, :], axis=2)
    dmax = dist.max() if dist.size else 1.0
    dhat = dist / dmax if dmax > 0 else np.zeros_like(dist)
    near = dhat if cfg.literal_distance_sign else 1.0 - dhat
    phi = d.phi[:, None]
    p = phi / 2 * near + phi / 2 * d.sqf[None, :] + (1 - phi) * d.noise_app
    q = cfg.mu * near + (1 - cfg.mu) * d.noise_prog
    n, m = p.shape
    p = p + TIE_EPS * (np.arange(m)[None, :] + 1)
    q = q + TIE_EPS * (np.arange(n)[:, None] + 1)
    return dist, p, q


def _assemble(cfg: GenConfig, d: _Draws, ranked: list[np.ndarray], couples) -> Instance:
    dist, p, q = _utilities(cfg, d)
    apps = [f"a{i}" for i in range(cfg.n_applicants)]
    progs = [f"s{j}" for j in range(cfg.n_programs)]
    prefs = []
    for i, js in enumerate(ranked):
        for j in js:
            prefs.append(Preference(apps[i], progs[j], float(p[i, j]), float(q[i, j]),
                                    float(dist[i, j])))
    return Instance(apps, progs, {s: int(c) for s, c in zip(progs, d.capacity)}, prefs,
                    [(apps[a], apps[b]) for a, b in couples])


def _top_k(utility: np.ndarray, k: int) -> np.ndarray:
    order = np.lexsort((np.arange(len(utility)), -utility))
    return order[:k]


def gen_school_instance(cfg: GenConfig) -> Instance:
    """Applicants rank their ``k`` highest-utility programs; programs score only
    applicants that ranked them."""
    cfg.check()
    d = _draw(cfg)
    _, p, _ = _utilities(cfg, d)
    ranked = [_top_k(p[i], int(d.k[i])) for i in range(cfg.n_applicants)]
    return _assemble(cfg, d, ranked, [])


def gen_residency_instance(cfg: GenConfig) -> Instance:
    """Like :func:`gen_school_instance`, with the first ``couples_count`` applicants
    paired as (0, 1), (2, 3), ...

    Partners share a home location and one valid-program set (their top
    programs by summed utility, size drawn from the couple stream); each partner
    orders that set by their own utility.
    """
    cfg.check()
    d = _draw(cfg)
    n_couples = cfg.couples_count // 2
    for c in range(n_couples):
        d.app_xy[2 * c + 1] = d.app_xy[2 * c]
    _, p, _ = _utilities(cfg, d)
    ranked = [_top_k(p[i], int(d.k[i])) for i in range(cfg.n_applicants)]
    couples = []
    for c in range(n_couples):
        a, b = 2 * c, 2 * c + 1
        shared = _top_k(p[a] + p[b], int(d.couple_k[c]))
        ranked[a] = shared
        ranked[b] = shared
        couples.append((a, b))
    return _assemble(cfg, d, ranked, couples)
