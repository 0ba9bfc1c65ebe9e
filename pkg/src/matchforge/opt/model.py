"""Solver-neutral description of linear / convex-quadratic (mixed-integer) programs."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import MalformedModel

INF = float("inf")


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    TIME_LIMIT = "TimeLimit"
    ERROR = "Error"


class OptModel:
    """Variables, one linear-or-quadratic objective and named linear constraints.

    Variables and constraints are addressed by integer index; names are kept for
    lookups and for the LP text dump. Bulk helpers take index arrays so that
    models with 10^5 rows can be built without per-row Python dicts.
    """

    def __init__(self, name: str = "model", sense: str = "min"):
        self.name = name
        self.sense = sense
        self.var_names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.binary: list[bool] = []
        self.obj: dict[int, float] = {}
        self.obj_const = 0.0
        self.quad: dict[tuple[int, int], float] = {}
        self.row_names: list[str] = []
        self.row_lo: list[float] = []
        self.row_hi: list[float] = []
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._var_index: dict[str, int] = {}
        self._row_index: dict[str, int] = {}

    # ---------------------------------------------------------------- variables
    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    @property
    def is_mip(self) -> bool:
        return any(self.binary)

    @property
    def is_qp(self) -> bool:
        return any(v != 0 for v in self.quad.values())

    def add_var(self, name: str, kind: str = "continuous", lb: float = 0.0, ub: float = INF) -> int:
        return int(self.add_vars([name], kind, lb, ub)[0])

    def add_vars(self, names, kind: str = "continuous", lb=0.0, ub=INF) -> np.ndarray:
        if kind not in ("continuous", "binary"):
            raise MalformedModel(f"unknown variable kind {kind!r}")
        names = list(names)
        n0 = self.n_vars
        lbs = np.broadcast_to(np.asarray(lb, dtype=float), (len(names),))
        ubs = np.broadcast_to(np.asarray(ub, dtype=float), (len(names),))
        if kind == "binary":
            lbs = np.maximum(lbs, 0.0)
            ubs = np.minimum(ubs, 1.0)
        for k, nm in enumerate(names):
            if nm in self._var_index:
                raise MalformedModel(f"duplicate variable name {nm!r}")
            self._var_index[nm] = n0 + k
        self.var_names.extend(names)
        self.lb.extend(lbs.tolist())
        self.ub.extend(ubs.tolist())
        self.binary.extend([kind == "binary"] * len(names))
        return np.arange(n0, n0 + len(names))

    def var(self, name: str) -> int:
        return self._var_index[name]

    # ---------------------------------------------------------------- objective
    def set_objective(self, linear=None, sense: str | None = None, quadratic=None,
                      constant: float = 0.0) -> None:
        """``linear`` maps index -> coef (dict or (idx, coef) arrays);
        ``quadratic`` maps (a, b) -> coef for the term coef * x_a * x_b."""
        if sense is not None:
            if sense not in ("min", "max"):
                raise MalformedModel(f"unknown sense {sense!r}")
            self.sense = sense
        self.obj = {}
        if linear is not None:
            idx, coef = _as_pairs(linear)
            for a, c in zip(idx, coef):
                self.obj[int(a)] = self.obj.get(int(a), 0.0) + float(c)
        self.quad = dict(quadratic or {})
        self.obj_const = float(constant)

    # -------------------------------------------------------------- constraints
    def add_constraint(self, coeffs, relation: str, rhs: float, name: str | None = None) -> int:
        idx, coef = _as_pairs(coeffs)
        return int(self.add_rows([idx], [coef], relation, [rhs],
                                 None if name is None else [name])[0])

    def add_rows(self, idx_list, coef_list, relation: str, rhs, names=None) -> np.ndarray:
        """Add several rows sharing one relation."""
        if relation not in ("<=", ">=", "=="):
            raise MalformedModel(f"unknown relation {relation!r}")
        r0 = self.n_rows
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (len(idx_list),))
        if names is None:
            names = [f"c{r0 + k}" for k in range(len(idx_list))]
        for k, (idx, coef, nm) in enumerate(zip(idx_list, coef_list, names)):
            idx = np.asarray(idx, dtype=np.int64)
            coef = np.broadcast_to(np.asarray(coef, dtype=float), idx.shape)
            if len(idx) and (idx.min() < 0 or idx.max() >= self.n_vars):
                raise MalformedModel(f"constraint {nm!r} references an undeclared variable")
            if nm in self._row_index:
                raise MalformedModel(f"duplicate constraint name {nm!r}")
            self._row_index[nm] = r0 + k
            self.row_names.append(nm)
            self._rows.append(np.full(len(idx), r0 + k, dtype=np.int64))
            self._cols.append(idx)
            self._vals.append(np.array(coef, dtype=float))
            b = float(rhs[k])
            self.row_lo.append(b if relation in (">=", "==") else -INF)
            self.row_hi.append(b if relation in ("<=", "==") else INF)
        return np.arange(r0, self.n_rows)

    def row(self, name: str) -> int:
        return self._row_index[name]

    # ---------------------------------------------------------------- export
    def matrix(self) -> sp.csr_matrix:
        if self._rows:
            rows = np.concatenate(self._rows)
            cols = np.concatenate(self._cols)
            vals = np.concatenate(self._vals)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_rows, self.n_vars))

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for a, v in self.obj.items():
            c[a] += v
        return c

    def hessian(self) -> sp.csc_matrix:
        """Symmetric H with objective 0.5 x'Hx reproducing the quadratic terms."""
        rows, cols, vals = [], [], []
        for (a, b), c in self.quad.items():
            if a == b:
                rows.append(a); cols.append(a); vals.append(2.0 * c)
            else:
                rows += [a, b]; cols += [b, a]; vals += [c, c]
        return sp.csc_matrix((vals, (rows, cols)), shape=(self.n_vars, self.n_vars))

    def validate(self) -> None:
        lb, ub = np.asarray(self.lb), np.asarray(self.ub)
        if np.any(lb > ub):
            raise MalformedModel("a variable has lb > ub")
        for (a, b) in self.quad:
            if not (0 <= a < self.n_vars and 0 <= b < self.n_vars):
                raise MalformedModel("quadratic term references an undeclared variable")
        for a in self.obj:
            if not 0 <= a < self.n_vars:
                raise MalformedModel("objective references an undeclared variable")

    def to_lp_string(self) -> str:
        """CPLEX-LP text of the model, for debugging."""
        def term(c, name, first):
            sign = "-" if c < 0 else ("" if first else "+")
            return f"{sign} {abs(c):.12g} {name}".strip()

        out = ["\\ " + self.name, "Minimize" if self.sense == "min" else "Maximize"]
        parts = [term(c, self.var_names[a], k == 0) for k, (a, c) in enumerate(sorted(self.obj.items()))]
        if self.quad:
            q = []
            for (a, b), c in sorted(self.quad.items()):
                nm = f"{self.var_names[a]} ^ 2" if a == b else f"{self.var_names[a]} * {self.var_names[b]}"
                q.append(f"{'-' if c < 0 else '+'} {2 * abs(c):.12g} {nm}")
            parts.append("+ [ " + " ".join(q).lstrip("+ ") + " ] / 2")
        out.append(" obj: " + (" ".join(parts) if parts else "0 " + (self.var_names[0] if self.var_names else "")))
        out.append("Subject To")
        A = self.matrix()
        for r, nm in enumerate(self.row_names):
            lo, hi = self.row_lo[r], self.row_hi[r]
            row = A.getrow(r)
            expr = " ".join(term(c, self.var_names[a], k == 0)
                            for k, (a, c) in enumerate(zip(row.indices, row.data))) or "0 " + self.var_names[0]
            if lo == hi:
                out.append(f" {nm}: {expr} = {hi:.12g}")
            elif hi < INF:
                out.append(f" {nm}: {expr} <= {hi:.12g}")
            else:
                out.append(f" {nm}: {expr} >= {lo:.12g}")
        out.append("Bounds")
        for a, nm in enumerate(self.var_names):
            if self.binary[a]:
                continue
            lo, hi = self.lb[a], self.ub[a]
            los = "-inf" if lo == -INF else f"{lo:.12g}"
            his = "+inf" if hi == INF else f"{hi:.12g}"
            out.append(f" {los} <= {nm} <= {his}")
        bins = [nm for a, nm in enumerate(self.var_names) if self.binary[a]]
        if bins:
            out.append("Binaries")
            out.extend(f" {nm}" for nm in bins)
        out.append("End")
        return "\n".join(out) + "\n"


def _as_pairs(coeffs):
    if isinstance(coeffs, dict):
        return np.fromiter(coeffs.keys(), dtype=np.int64, count=len(coeffs)), \
            np.fromiter(coeffs.values(), dtype=float, count=len(coeffs))
    idx, coef = coeffs
    idx = np.asarray(idx, dtype=np.int64)
    return idx, np.broadcast_to(np.asarray(coef, dtype=float), idx.shape)


@dataclass
class OptSolution:
    status: Status
    x: np.ndarray | None = None
    objective: float | None = None
    row_duals: np.ndarray | None = None
    col_duals: np.ndarray | None = None
    wall_time: float = 0.0
    gap: float | None = None
    backend: str = ""
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    @property
    def has_duals(self) -> bool:
        return self.row_duals is not None


def lp_certificate_residuals(model: OptModel, sol: OptSolution) -> dict:
    """Primal/dual feasibility, complementary slackness and duality gap of an LP.

    Duals follow the shadow-price convention: ``y_r`` is d(objective)/d(rhs_r),
    so for a minimisation a ``<=`` row has ``y_r <= 0`` and a ``>=`` row
    ``y_r >= 0``; for maximisation the signs flip.
    """
    if model.is_mip or model.is_qp or not sol.has_duals:
        raise ValueError("certificate residuals are defined for solved LPs only")
    A = model.matrix()
    c = model.cost_vector()
    x, y = sol.x, sol.row_duals
    lb, ub = np.asarray(model.lb), np.asarray(model.ub)
    lo, hi = np.asarray(model.row_lo), np.asarray(model.row_hi)
    ax = A @ x
    primal = max(0.0, float(np.max(np.concatenate((lo - ax, ax - hi, lb - x, x - ub)), initial=0.0)))
    s = 1.0 if model.sense == "min" else -1.0
    ys = s * y  # minimisation-form multipliers
    z = s * c - A.T @ ys  # reduced costs
    # Dual feasibility: row multipliers signed by which side can bind, reduced
    # costs signed by which bound can bind.
    viol = []
    viol.append(np.where(np.isinf(hi), np.maximum(-ys, 0), 0))
    viol.append(np.where(np.isinf(lo), np.maximum(ys, 0), 0))
    viol.append(np.where(np.isinf(ub), np.maximum(-z, 0), 0))
    viol.append(np.where(np.isinf(lb), np.maximum(z, 0), 0))
    dual = float(np.max(np.concatenate(viol), initial=0.0))
    # Complementary slackness: multipliers times the slack of the side they price.
    row_cs = np.where(ys > 0, ys * np.where(np.isinf(lo), 0, ax - lo),
                      -ys * np.where(np.isinf(hi), 0, hi - ax))
    col_cs = np.where(z > 0, z * np.where(np.isinf(lb), 0, x - lb),
                      -z * np.where(np.isinf(ub), 0, ub - x))
    cs = float(np.max(np.abs(np.concatenate((row_cs, col_cs))), initial=0.0))
    dual_obj = float(np.sum(np.where(ys > 0, ys * np.where(np.isinf(lo), 0, lo),
                                     ys * np.where(np.isinf(hi), 0, hi))))
    dual_obj += float(np.sum(np.where(z > 0, z * np.where(np.isinf(lb), 0, lb),
                                      z * np.where(np.isinf(ub), 0, ub))))
    primal_obj = float(s * c @ x)
    return {"primal_infeasibility": primal, "dual_infeasibility": dual,
            "complementary_slackness": cs, "primal_objective": s * primal_obj + model.obj_const,
            "dual_objective": s * dual_obj + model.obj_const,
            "duality_gap": abs(primal_obj - dual_obj)}
