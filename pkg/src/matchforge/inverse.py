"""Inverse optimization: a cost vector under which a given stable matching is LP-optimal.

The relaxed forward problem is

    min  b'x   s.t.  sum_j x_ij <= 1 (u_i <= 0),  sum_i x_ij <= C_j (v_j <= 0),
                     sum x >= N (w >= 0),  x >= 0,

whose dual constraints are ``u_i + v_j + w <= b_ij``. Given a reference matching
``x_ref`` the inverse problem picks ``b`` (and a dual certificate) so that
``x_ref`` and the certificate satisfy complementary slackness and strong duality,
while ``sum(b) = 1`` rules out the zero vector and a penalty keeps ``b`` close to
a prior ``b_bar``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import opt
from .core import UNMATCHED, Matching, ValidatedInstance, check_feasible
from .errors import InfeasibleInverse, NumericalFailure
from .opt import INF, OptModel, Status

# Box on b used when there is no regularisation; the plain LP is unbounded
# whenever some admissible pair lies outside the reference matching.
UNREGULARISED_BOX = 1.0


@dataclass
class CostVector:
    b: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: float
    lambda_reg: float
    prior: str = "uniform"
    surrogate: str = "squared_l2"
    residuals: dict = field(default_factory=dict)

    def value(self, inst: ValidatedInstance, i: int, j: int) -> float:
        return float(self.b[inst.pair(i, j)])

    def to_json_dict(self, inst: ValidatedInstance) -> dict:
        return {
            "pairs": [[inst.applicant_ids[i], inst.program_ids[j], float(self.b[k])]
                      for k, (i, j) in enumerate(zip(inst.pair_app, inst.pair_prog))],
            "u": {a: float(x) for a, x in zip(inst.applicant_ids, self.u)},
            "v": {s: float(x) for s, x in zip(inst.program_ids, self.v)},
            "w": float(self.w),
            "lambda_reg": self.lambda_reg,
            "prior": self.prior,
            "surrogate": self.surrogate,
            "residuals": {k: float(x) for k, x in sorted(self.residuals.items())},
        }

    @classmethod
    def from_json_dict(cls, inst: ValidatedInstance, data: dict) -> "CostVector":
        b = np.full(inst.n_pairs, np.nan)
        for a, s, val in data["pairs"]:
            b[inst.pair(inst.applicant_index(a), inst.program_index(s))] = val
        if np.isnan(b).any():
            raise ValueError("cost vector does not cover every admissible pair")
        u = np.array([data["u"][a] for a in inst.applicant_ids], dtype=float)
        v = np.array([data["v"][s] for s in inst.program_ids], dtype=float)
        return cls(b, u, v, float(data["w"]), float(data["lambda_reg"]),
                   data.get("prior", "uniform"), data.get("surrogate", "squared_l2"),
                   dict(data.get("residuals", {})))


def save_cost_vector(inst: ValidatedInstance, cv: CostVector, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(cv.to_json_dict(inst), fh, indent=1)
        fh.write("\n")


def load_cost_vector(inst: ValidatedInstance, path) -> CostVector:
    with open(path, encoding="utf-8") as fh:
        return CostVector.from_json_dict(inst, json.load(fh))


def default_prior(inst: ValidatedInstance, kind: str = "uniform") -> np.ndarray:
    """Starting cost vector, normalised to sum to one.

    ``uniform`` is 1/|S| everywhere; ``distance`` is proportional to travel
    distance (uniform if all distances are zero).
    """
    n = inst.n_pairs
    if n == 0:
        return np.zeros(0)
    if kind == "uniform":
        return np.full(n, 1.0 / n)
    if kind == "distance":
        tot = inst.dist.sum()
        return inst.dist / tot if tot > 0 else np.full(n, 1.0 / n)
    raise ValueError(f"unknown prior {kind!r}")


def _build_inverse(inst, support, matched_n, b_bar, lambda_reg, squared):
    m = OptModel("inverse")
    S, I, J = inst.n_pairs, inst.n_applicants, inst.n_programs
    box = UNREGULARISED_BOX if lambda_reg == 0 else INF
    b = m.add_vars([f"b_{k}" for k in range(S)], lb=-box, ub=box)
    u = m.add_vars([f"u_{i}" for i in range(I)], lb=-INF, ub=0.0)
    v = m.add_vars([f"v_{j}" for j in range(J)], lb=-INF, ub=0.0)
    w = m.add_var("w", lb=0.0)
    on = np.zeros(S, dtype=bool)
    on[support] = True
    for k in range(S):
        idx = [b[k], u[inst.pair_app[k]], v[inst.pair_prog[k]], w]
        if on[k]:
            m.add_constraint((idx, [1.0, -1.0, -1.0, -1.0]), "==", 0.0, f"slack_{k}")
        else:
            m.add_constraint((idx, [-1.0, 1.0, 1.0, 1.0]), "<=", 0.0, f"dual_{k}")
    m.add_constraint((np.concatenate([b[support], u, v, [w]]),
                      np.concatenate([np.ones(len(support)), -np.ones(I),
                                      -inst.capacity.astype(float), [-float(matched_n)]])),
                     "==", 0.0, "strong_duality")
    m.add_constraint((b, 1.0), "==", 1.0, "normalization")

    lin = np.zeros(m.n_vars)
    lin[b[support]] += 1.0
    quad = None
    if lambda_reg > 0 and squared:
        lin[b] += -2.0 * lambda_reg * b_bar
        quad = {(int(bk), int(bk)): lambda_reg for bk in b}
        const = lambda_reg * float(b_bar @ b_bar)
    elif lambda_reg > 0:
        t = m.add_vars([f"t_{k}" for k in range(S)], lb=0.0)
        lin = np.concatenate([lin, np.full(S, lambda_reg)])
        m.add_rows([[t[k], b[k]] for k in range(S)], [[1.0, -1.0]] * S, ">=", -b_bar,
                   [f"abs_lo_{k}" for k in range(S)])
        m.add_rows([[t[k], b[k]] for k in range(S)], [[1.0, 1.0]] * S, ">=", b_bar,
                   [f"abs_hi_{k}" for k in range(S)])
        const = 0.0
    else:
        const = 0.0
    m.set_objective((np.arange(len(lin)), lin), quadratic=quad, constant=const)
    return m, b, u, v, w


def _canonical_certificate(inst, support, matched_n, b_val, backend, time_limit):
    """Given b, the dual prices closest to zero (max sum u + sum v) satisfying
    every inverse constraint."""
    m = OptModel("certificate", sense="max")
    u = m.add_vars([f"u_{i}" for i in range(inst.n_applicants)], lb=-INF, ub=0.0)
    v = m.add_vars([f"v_{j}" for j in range(inst.n_programs)], lb=-INF, ub=0.0)
    w = m.add_var("w", lb=0.0)
    on = np.zeros(inst.n_pairs, dtype=bool)
    on[support] = True
    for k in range(inst.n_pairs):
        idx = [u[inst.pair_app[k]], v[inst.pair_prog[k]], w]
        rel = "==" if on[k] else "<="
        m.add_constraint((idx, 1.0), rel, float(b_val[k]), f"pair_{k}")
    m.add_constraint((np.concatenate([u, v, [w]]),
                      np.concatenate([np.ones(inst.n_applicants), inst.capacity.astype(float),
                                      [float(matched_n)]])),
                     "==", float(b_val[support].sum()), "strong_duality")
    m.set_objective((np.concatenate([u, v]), 1.0))
    sol = opt.solve(m, time_limit=time_limit, backend=backend)
    if not sol.optimal:
        return None
    return sol.x[u], sol.x[v], float(sol.x[w])


def _polish(inst, support, ref: Matching, b, u, v, w):
    """Project a numerically-solved certificate onto the exact constraint set."""
    b, u, v = b.copy(), np.minimum(u, 0.0), np.minimum(v, 0.0)
    w = max(w, 0.0)
    u[ref.assignment == UNMATCHED] = 0.0
    v[ref.recompute_fill() < inst.capacity] = 0.0
    price = u[inst.pair_app] + v[inst.pair_prog]
    on = np.zeros(inst.n_pairs, dtype=bool)
    on[support] = True
    b[on] = price[on] + w
    b[~on] = np.maximum(b[~on], price[~on] + w)
    delta = (1.0 - b.sum()) / inst.n_pairs
    if w + delta >= 0:
        w += delta
        b += delta
    else:
        need = 1.0 - b.sum()
        slack = np.where(~on, b - price - w, 0.0)
        if slack.sum() < -need:
            raise NumericalFailure("cannot restore normalization without breaking feasibility")
        b -= slack * (-need / slack.sum())
    return b, u, v, w


def certificate_residuals(inst: ValidatedInstance, ref: Matching, cv: CostVector) -> dict:
    support = ref.pair_indices(inst)
    on = np.zeros(inst.n_pairs, dtype=bool)
    on[support] = True
    reduced = cv.b - cv.u[inst.pair_app] - cv.v[inst.pair_prog] - cv.w
    primal = float(cv.b[on].sum())
    dual = float(cv.u.sum() + inst.capacity @ cv.v + ref.matched_count * cv.w)
    return {
        "normalization": abs(float(cv.b.sum()) - 1.0),
        "dual_feasibility": float(max(0.0, -reduced.min())) if inst.n_pairs else 0.0,
        "complementary_slackness": float(np.abs(reduced[on]).max()) if on.any() else 0.0,
        "sign": float(max(0.0, cv.u.max(initial=0.0), cv.v.max(initial=0.0), -cv.w)),
        "duality_gap": abs(primal - dual),
    }


def recover_cost(inst: ValidatedInstance, x_ref: Matching, b_bar=None, lambda_reg: float = 1.0,
                 backend: str | None = None, time_limit: float | None = None,
                 prior: str = "uniform", surrogate: str | None = None,
                 verify: bool = True) -> CostVector:
    """Recover ``b*`` making ``x_ref`` optimal for the relaxed assignment LP.

    ``surrogate`` is ``"squared_l2"`` (convex QP) or ``"l1"`` (LP); by default
    the squared norm is used when the backend can solve QPs.
    """
    check_feasible(inst, x_ref)
    if lambda_reg < 0:
        raise ValueError("lambda_reg must be nonnegative")
    if inst.n_pairs == 0:
        raise InfeasibleInverse("no admissible pairs")
    if b_bar is None:
        b_bar = default_prior(inst, prior)
    b_bar = np.asarray(b_bar, dtype=float)
    if b_bar.shape != (inst.n_pairs,):
        raise ValueError("prior must have one entry per admissible pair")
    if surrogate is None:
        surrogate = "squared_l2" if opt.supports_qp(backend) else "l1"
    support = x_ref.pair_indices(inst)
    n = x_ref.matched_count

    model, b, u, v, w = _build_inverse(inst, support, n, b_bar, lambda_reg,
                                       surrogate == "squared_l2")
    sol = opt.solve(model, time_limit=time_limit, backend=backend)
    if sol.status is Status.INFEASIBLE:
        raise InfeasibleInverse("reference matching is not LP-optimal for any cost vector")
    if not sol.optimal:
        raise NumericalFailure(f"inverse problem ended with status {sol.status.value}")
    b_val = sol.x[b]
    cert = _canonical_certificate(inst, support, n, b_val, backend, time_limit)
    if cert is None:
        u_val, v_val, w_val = sol.x[u], sol.x[v], float(sol.x[w])
    else:
        u_val, v_val, w_val = cert
    b_val, u_val, v_val, w_val = _polish(inst, support, x_ref, b_val, u_val, v_val, w_val)
    cv = CostVector(b_val, u_val, v_val, w_val, lambda_reg,
                    prior if isinstance(prior, str) else "custom", surrogate)
    cv.residuals = certificate_residuals(inst, x_ref, cv)
    cv.residuals["objective"] = float(b_val[support].sum()
                                      + lambda_reg * np.sum((b_val - b_bar) ** 2))
    if verify:
        cv.residuals["forward_gap"] = forward_lp_gap(inst, cv, x_ref, backend=backend)
    return cv


def relaxed_forward_lp(inst: ValidatedInstance, cost, n_min: int) -> OptModel:
    m = OptModel("relaxed_forward")
    x = m.add_vars([f"x_{k}" for k in range(inst.n_pairs)], lb=0.0, ub=1.0)
    m.add_rows([x[inst.app_ptr[i]:inst.app_ptr[i + 1]] for i in range(inst.n_applicants)],
               [1.0] * inst.n_applicants, "<=", 1.0,
               [f"unique_{i}" for i in range(inst.n_applicants)])
    m.add_rows([x[ks] for ks in inst.prog_pairs], [1.0] * inst.n_programs, "<=",
               inst.capacity.astype(float), [f"capacity_{j}" for j in range(inst.n_programs)])
    m.add_constraint((x, 1.0), ">=", float(n_min), "min_matched")
    m.set_objective((x, np.asarray(cost, dtype=float)))
    return m


def forward_lp_gap(inst: ValidatedInstance, cv: CostVector, x_ref: Matching,
                   backend: str | None = None) -> float:
    """|LP optimum of min b*'x over the relaxed polytope - b*'x_ref|."""
    model = relaxed_forward_lp(inst, cv.b, x_ref.matched_count)
    sol = opt.solve(model, backend=backend)
    if not sol.optimal:
        raise NumericalFailure(f"forward LP re-solve ended with status {sol.status.value}")
    return abs(sol.objective - float(cv.b[x_ref.pair_indices(inst)].sum()))
