"""Problem representation: instances, admissible pairs, preference ranks, matchings.

A raw :class:`Instance` holds external string IDs and sparse utilities exactly as
loaded. :func:`validate_instance` turns it into a :class:`ValidatedInstance`, which
uses dense integer IDs and flat per-pair arrays laid out so that each applicant's
preference list is a contiguous, best-first slice.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InfeasibleMatching, InstanceValidationError, PairNotAdmissible

UNMATCHED = -1


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


@dataclass
class Preference:
    applicant: str
    program: str
    p: float
    q: float
    distance: float = 0.0


@dataclass
class Instance:
    """Problem statement as loaded, keyed by external IDs."""

    applicants: list[str]
    programs: list[str]
    capacity: dict[str, int]
    preferences: list[Preference]
    couples: list[tuple[str, str]] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "applicants": list(self.applicants),
            "programs": [{"id": j, "capacity": int(self.capacity[j])} for j in self.programs],
            "preferences": [
                {"applicant": r.applicant, "program": r.program,
                 "p": r.p, "q": r.q, "distance": r.distance}
                for r in self.preferences
            ],
            "couples": [[a, b] for a, b in self.couples],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Instance":
        applicants = [a if isinstance(a, str) else a["id"] for a in data["applicants"]]
        programs, capacity = [], {}
        for entry in data["programs"]:
            programs.append(entry["id"])
            capacity[entry["id"]] = entry["capacity"]
        prefs = [
            Preference(str(r["applicant"]), str(r["program"]), float(r["p"]),
                       float(r["q"]), float(r.get("distance", 0.0)))
            for r in data.get("preferences", [])
        ]
        couples = [(str(a), str(b)) for a, b in data.get("couples", [])]
        return cls([str(a) for a in applicants], [str(j) for j in programs],
                   capacity, prefs, couples)


def dump_instance(inst: Instance, path) -> None:
    text = json.dumps(inst.to_json_dict(), indent=1, sort_keys=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def load_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return Instance.from_json_dict(json.load(fh))


class ValidatedInstance:
    """Immutable, index-based view of a checked instance.

    Pair ``k`` joins applicant ``pair_app[k]`` and program ``pair_prog[k]``.
    Pairs are sorted by applicant and then by decreasing applicant utility, so
    ``P(i)`` is ``range(app_ptr[i], app_ptr[i + 1])`` best first. ``prog_pairs[j]``
    lists the pairs of program ``j`` by decreasing program utility.
    """

    def __init__(self, applicant_ids, program_ids, capacity, pair_app, pair_prog,
                 p, q, dist, partner):
        self.applicant_ids = tuple(applicant_ids)
        self.program_ids = tuple(program_ids)
        self.n_applicants = len(self.applicant_ids)
        self.n_programs = len(self.program_ids)
        self.capacity = _frozen(np.asarray(capacity, dtype=np.int64))

        order = np.lexsort((-np.asarray(p, dtype=float), np.asarray(pair_app)))
        self.pair_app = _frozen(np.asarray(pair_app, dtype=np.int64)[order])
        self.pair_prog = _frozen(np.asarray(pair_prog, dtype=np.int64)[order])
        self.p = _frozen(np.asarray(p, dtype=float)[order])
        self.q = _frozen(np.asarray(q, dtype=float)[order])
        self.dist = _frozen(np.asarray(dist, dtype=float)[order])
        self.partner = _frozen(np.asarray(partner, dtype=np.int64))
        self.n_pairs = len(self.pair_app)

        counts = np.bincount(self.pair_app, minlength=self.n_applicants)
        self.app_ptr = _frozen(np.concatenate(([0], np.cumsum(counts))).astype(np.int64))
        self.app_rank = _frozen(np.arange(self.n_pairs) - self.app_ptr[self.pair_app])
        self.list_len = _frozen(counts.astype(np.int64))

        prog_pairs = []
        prog_rank = np.empty(self.n_pairs, dtype=np.int64)
        for j in range(self.n_programs):
            ks = np.flatnonzero(self.pair_prog == j)
            ks = ks[np.argsort(-self.q[ks], kind="stable")]
            prog_rank[ks] = np.arange(len(ks))
            prog_pairs.append(_frozen(ks))
        self.prog_pairs = tuple(prog_pairs)
        self.prog_rank = _frozen(prog_rank)
        self.prog_len = _frozen(np.array([len(ks) for ks in prog_pairs], dtype=np.int64))
        self.pair_index = {(int(i), int(j)): k for k, (i, j)
                           in enumerate(zip(self.pair_app, self.pair_prog))}
        self._app_index = {a: i for i, a in enumerate(self.applicant_ids)}
        self._prog_index = {j: n for n, j in enumerate(self.program_ids)}

        # Rank fractions are constants of the instance: |P_<(i,j)|/|P(i)| and
        # |Q_<(i,j)|/|Q(j)|.
        self.rank_frac_app = _frozen((self.list_len[self.pair_app] - 1 - self.app_rank)
                                     / self.list_len[self.pair_app])
        self.rank_frac_prog = _frozen((self.prog_len[self.pair_prog] - 1 - self.prog_rank)
                                      / self.prog_len[self.pair_prog])

    # ------------------------------------------------------------------ lookups
    def applicant_index(self, ext_id: str) -> int:
        return self._app_index[ext_id]

    def program_index(self, ext_id: str) -> int:
        return self._prog_index[ext_id]

    def pair(self, i: int, j: int) -> int:
        try:
            return self.pair_index[(int(i), int(j))]
        except KeyError:
            raise PairNotAdmissible(f"({i}, {j}) is not an admissible pair") from None

    def preference_list(self, i: int) -> np.ndarray:
        """Programs of applicant ``i`` best first."""
        return self.pair_prog[self.app_ptr[i]:self.app_ptr[i + 1]]

    def priority_list(self, j: int) -> np.ndarray:
        """Applicants of program ``j`` best first."""
        return self.pair_app[self.prog_pairs[j]]

    @property
    def couples(self) -> list[tuple[int, int]]:
        """Unordered couples as ``(i, D(i))`` with ``i < D(i)``."""
        return [(i, int(d)) for i, d in enumerate(self.partner) if d > i]

    @property
    def p_max(self) -> int:
        return int(self.list_len.max()) if self.n_applicants else 0

    @property
    def c_max(self) -> int:
        return int(self.capacity.max()) if self.n_programs else 0

    def to_instance(self) -> Instance:
        prefs = [
            Preference(self.applicant_ids[i], self.program_ids[j], float(self.p[k]),
                       float(self.q[k]), float(self.dist[k]))
            for k, (i, j) in enumerate(zip(self.pair_app, self.pair_prog))
        ]
        return Instance(list(self.applicant_ids), list(self.program_ids),
                        {j: int(c) for j, c in zip(self.program_ids, self.capacity)},
                        prefs, [(self.applicant_ids[a], self.applicant_ids[b])
                                for a, b in self.couples])

    def restrict(self, keep_pairs) -> "ValidatedInstance":
        """Sub-instance over the pair indices ``keep_pairs`` (same ID tables)."""
        keep = np.zeros(self.n_pairs, dtype=bool)
        keep[np.asarray(list(keep_pairs), dtype=np.int64)] = True
        return ValidatedInstance(self.applicant_ids, self.program_ids, self.capacity,
                                 self.pair_app[keep], self.pair_prog[keep], self.p[keep],
                                 self.q[keep], self.dist[keep], self.partner)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


def validate_instance(raw: Instance) -> ValidatedInstance:
    """Check ``raw`` and precompute the admissible-pair structure.

    Preference rows with a non-positive ``p`` or ``q`` are not admissible and are
    dropped. Every other problem is collected and raised together as an
    :class:`InstanceValidationError`.
    """
    out: list[Violation] = []
    app_index: dict[str, int] = {}
    for a in raw.applicants:
        if a in app_index:
            out.append(Violation("DuplicateId", f"applicant {a!r} listed twice"))
        app_index.setdefault(a, len(app_index))
    prog_index: dict[str, int] = {}
    for j in raw.programs:
        if j in prog_index:
            out.append(Violation("DuplicateId", f"program {j!r} listed twice"))
        prog_index.setdefault(j, len(prog_index))

    capacity = np.zeros(len(prog_index), dtype=np.int64)
    for j, n in prog_index.items():
        c = raw.capacity.get(j)
        if c is None:
            out.append(Violation("UnknownId", f"no capacity for program {j!r}"))
        elif c < 0 or int(c) != c:
            out.append(Violation("NegativeCapacity", f"program {j!r} has capacity {c!r}"))
        else:
            capacity[n] = int(c)
    for j in raw.capacity:
        if j not in prog_index:
            out.append(Violation("UnknownId", f"capacity given for unknown program {j!r}"))

    seen: set[tuple[int, int]] = set()
    rows_i, rows_j, ps, qs, ds = [], [], [], [], []
    for r in raw.preferences:
        i, j = app_index.get(r.applicant), prog_index.get(r.program)
        if i is None or j is None:
            which = r.applicant if i is None else r.program
            out.append(Violation("UnknownId", f"preference references unknown id {which!r}"))
            continue
        if (i, j) in seen:
            out.append(Violation("DuplicateRank",
                                 f"applicant {r.applicant!r} ranks {r.program!r} twice"))
            continue
        seen.add((i, j))
        if not (np.isfinite(r.p) and np.isfinite(r.q) and np.isfinite(r.distance)):
            out.append(Violation("NonFiniteValue", f"pair ({r.applicant!r}, {r.program!r})"))
            continue
        if r.distance < 0:
            out.append(Violation("NegativeDistance", f"pair ({r.applicant!r}, {r.program!r})"))
            continue
        if r.p <= 0 or r.q <= 0:
            continue
        rows_i.append(i)
        rows_j.append(j)
        ps.append(r.p)
        qs.append(r.q)
        ds.append(r.distance)

    rows_i_a = np.asarray(rows_i, dtype=np.int64)
    rows_j_a = np.asarray(rows_j, dtype=np.int64)
    ps_a, qs_a = np.asarray(ps, dtype=float), np.asarray(qs, dtype=float)
    out.extend(_tie_violations(rows_i_a, ps_a, raw.applicants, "applicant"))
    out.extend(_tie_violations(rows_j_a, qs_a, raw.programs, "program"))

    partner = np.full(len(app_index), UNMATCHED, dtype=np.int64)
    for a, b in raw.couples:
        if a not in app_index or b not in app_index:
            out.append(Violation("UnknownId", f"couple ({a!r}, {b!r}) has an unknown member"))
            continue
        ia, ib = app_index[a], app_index[b]
        if ia == ib or partner[ia] not in (UNMATCHED, ib) or partner[ib] not in (UNMATCHED, ia):
            out.append(Violation("BrokenCoupleInvolution",
                                 f"couple ({a!r}, {b!r}) is not a one-to-one pairing"))
            continue
        partner[ia], partner[ib] = ib, ia
    valid_sets: dict[int, set[int]] = {}
    for i, j in zip(rows_i, rows_j):
        valid_sets.setdefault(i, set()).add(j)
    for ia in range(len(partner)):
        ib = partner[ia]
        if ib > ia and valid_sets.get(ia, set()) != valid_sets.get(int(ib), set()):
            out.append(Violation(
                "BrokenCoupleInvolution",
                f"partners {raw.applicants[ia]!r} and {raw.applicants[ib]!r} "
                "do not share the same set of valid programs"))

    if out:
        raise InstanceValidationError(out)
    return ValidatedInstance(list(app_index), list(prog_index), capacity, rows_i_a,
                             rows_j_a, ps_a, qs_a, np.asarray(ds, dtype=float), partner)


def _tie_violations(owner, values, names, side):
    if len(owner) == 0:
        return []
    order = np.lexsort((values, owner))
    o, v = owner[order], values[order]
    dup = np.flatnonzero((o[1:] == o[:-1]) & (v[1:] == v[:-1]))
    return [Violation("TiedUtility", f"{side} {names[o[k]]!r} has two entries with utility {v[k]!r}")
            for k in dup]


def rank_fraction_applicant(inst: ValidatedInstance, i: int, j: int) -> float:
    """Share of applicant ``i``'s list ranked strictly below ``j``."""
    return float(inst.rank_frac_app[inst.pair(i, j)])


def rank_fraction_program(inst: ValidatedInstance, i: int, j: int) -> float:
    """Share of program ``j``'s admissible applicants ranked strictly below ``i``."""
    return float(inst.rank_frac_prog[inst.pair(i, j)])


class Matching:
    """Partial assignment applicant -> program with incrementally kept fill counts.

    Not thread-safe; one writer at a time.
    """

    def __init__(self, n_applicants: int, n_programs: int, assignment=None):
        if assignment is None:
            self.assignment = np.full(n_applicants, UNMATCHED, dtype=np.int64)
        else:
            self.assignment = np.array(assignment, dtype=np.int64)
            if self.assignment.shape != (n_applicants,):
                raise ValueError("assignment length does not match n_applicants")
        self.n_programs = n_programs
        self._fill = self.recompute_fill()

    @classmethod
    def empty(cls, inst: ValidatedInstance) -> "Matching":
        return cls(inst.n_applicants, inst.n_programs)

    @classmethod
    def from_pairs(cls, inst: ValidatedInstance, pairs: Iterable[tuple[int, int]]) -> "Matching":
        m = cls.empty(inst)
        for i, j in pairs:
            m.assign(i, j)
        return m

    @classmethod
    def from_pair_vector(cls, inst: ValidatedInstance, x) -> "Matching":
        x = np.asarray(x)
        m = cls.empty(inst)
        for k in np.flatnonzero(x > 0.5):
            i = int(inst.pair_app[k])
            if m.assignment[i] != UNMATCHED:
                raise InfeasibleMatching(f"applicant {i} assigned twice")
            m.assign(i, int(inst.pair_prog[k]))
        return m

    def assign(self, i: int, j: int) -> None:
        prev = self.assignment[i]
        if prev != UNMATCHED:
            self._fill[prev] -= 1
        self.assignment[i] = j
        self._fill[j] += 1

    def unassign(self, i: int) -> None:
        prev = self.assignment[i]
        if prev != UNMATCHED:
            self._fill[prev] -= 1
            self.assignment[i] = UNMATCHED

    @property
    def fill(self) -> np.ndarray:
        return self._fill.copy()

    def recompute_fill(self) -> np.ndarray:
        a = self.assignment[self.assignment != UNMATCHED]
        return np.bincount(a, minlength=self.n_programs).astype(np.int64)

    @property
    def matched_count(self) -> int:
        return int(np.count_nonzero(self.assignment != UNMATCHED))

    def pairs(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in enumerate(self.assignment) if j != UNMATCHED]

    def pair_indices(self, inst: ValidatedInstance) -> np.ndarray:
        return np.array([inst.pair(i, j) for i, j in self.pairs()], dtype=np.int64)

    def pair_vector(self, inst: ValidatedInstance) -> np.ndarray:
        x = np.zeros(inst.n_pairs)
        x[self.pair_indices(inst)] = 1.0
        return x

    def copy(self) -> "Matching":
        return Matching(len(self.assignment), self.n_programs, self.assignment)

    def __eq__(self, other) -> bool:
        return isinstance(other, Matching) and np.array_equal(self.assignment, other.assignment)

    def __repr__(self) -> str:
        return f"Matching({self.pairs()})"


def check_feasible(inst: ValidatedInstance, m: Matching) -> None:
    """Raise :class:`InfeasibleMatching` unless ``m`` respects S and capacities."""
    if len(m.assignment) != inst.n_applicants or m.n_programs != inst.n_programs:
        raise InfeasibleMatching("matching shape does not match the instance")
    for i, j in m.pairs():
        if (i, j) not in inst.pair_index:
            raise InfeasibleMatching(f"pair ({i}, {j}) is not admissible")
    over = np.flatnonzero(m.recompute_fill() > inst.capacity)
    if len(over):
        raise InfeasibleMatching(f"program {int(over[0])} is over capacity")


def total_travel(inst: ValidatedInstance, m: Matching) -> float:
    ks = m.pair_indices(inst)
    return float(inst.dist[ks].sum()) if len(ks) else 0.0


# ---------------------------------------------------------------- matching CSV
MATCHING_HEADER = ("applicant", "program", "rank_of_match")


def matching_to_csv(inst: ValidatedInstance, m: Matching) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MATCHING_HEADER)
    for i, j in m.pairs():
        w.writerow([inst.applicant_ids[i], inst.program_ids[j],
                    int(inst.app_rank[inst.pair(i, j)]) + 1])
    return buf.getvalue()


def write_matching(inst: ValidatedInstance, m: Matching, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(matching_to_csv(inst, m))


def read_matching(inst: ValidatedInstance, path) -> Matching:
    m = Matching.empty(inst)
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                i = inst.applicant_index(row["applicant"])
                j = inst.program_index(row["program"])
            except KeyError as exc:
                raise InfeasibleMatching(f"unknown id in matching file: {exc}") from None
            if m.assignment[i] != UNMATCHED:
                raise InfeasibleMatching(f"applicant {row['applicant']!r} appears twice")
            m.assign(i, j)
    check_feasible(inst, m)
    return m


def build_instance(capacity: Sequence[int], applicant_prefs: Sequence[Sequence[int]],
                   program_prefs: Sequence[Sequence[int]], distance=None,
                   couples: Sequence[tuple[int, int]] = ()) -> ValidatedInstance:
    """Small-instance helper from ordinal lists (best first) over dense indices.

    A pair is admissible when it appears in both the applicant's and the
    program's list. Utilities are ``len(list) - position``.
    """
    n_app, n_prog = len(applicant_prefs), len(capacity)
    prefs = []
    q_of = {}
    for j, lst in enumerate(program_prefs):
        for pos, i in enumerate(lst):
            q_of[(i, j)] = float(len(lst) - pos)
    for i, lst in enumerate(applicant_prefs):
        for pos, j in enumerate(lst):
            if (i, j) in q_of:
                d = 0.0 if distance is None else float(distance[i][j])
                prefs.append(Preference(f"a{i}", f"s{j}", float(len(lst) - pos), q_of[(i, j)], d))
    raw = Instance([f"a{i}" for i in range(n_app)], [f"s{j}" for j in range(n_prog)],
                   {f"s{j}": int(c) for j, c in enumerate(capacity)}, prefs,
                   [(f"a{a}", f"a{b}") for a, b in couples])
    return validate_instance(raw)
