"""Assignment metrics, the blocking-pair tail bound, and CSV/JSON emitters."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .blocking import count_blocking_pairs
from .core import UNMATCHED, Matching, ValidatedInstance, total_travel
from .errors import HypothesisViolated
from .forward import couples_colocated


@dataclass
class MetricsReport:
    matched_count: int
    unmatched_count: int
    avg_travel_miles: float
    total_travel: float
    bp_count: int
    bp_pct: float
    n_admissible: int
    rank_histogram: dict[int, int] = field(default_factory=dict)
    couples_same_location: int = 0
    n_couples: int = 0
    travel_reduction_pct: float | None = None

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["rank_histogram"] = {str(k): v for k, v in sorted(self.rank_histogram.items())}
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "MetricsReport":
        d = dict(d)
        d["rank_histogram"] = {int(k): int(v) for k, v in d.get("rank_histogram", {}).items()}
        return cls(**d)


def average_travel(inst: ValidatedInstance, m: Matching) -> float:
    """Mean travel over matched applicants only (0 when nobody is matched)."""
    n = m.matched_count
    return total_travel(inst, m) / n if n else 0.0


def travel_reduction_pct(inst: ValidatedInstance, m: Matching, baseline: Matching) -> float:
    base = average_travel(inst, baseline)
    if base == 0:
        return 0.0
    return 100.0 * (1.0 - average_travel(inst, m) / base)


def compute_metrics(inst: ValidatedInstance, m: Matching,
                    baseline: Matching | None = None) -> MetricsReport:
    bp = count_blocking_pairs(inst, m)
    hist: dict[int, int] = {}
    for i, j in m.pairs():
        rank = int(inst.app_rank[inst.pair(i, j)]) + 1
        hist[rank] = hist.get(rank, 0) + 1
    return MetricsReport(
        matched_count=m.matched_count,
        unmatched_count=int((m.assignment == UNMATCHED).sum()),
        avg_travel_miles=average_travel(inst, m),
        total_travel=total_travel(inst, m),
        bp_count=bp.count,
        bp_pct=bp.pct_of_admissible,
        n_admissible=inst.n_pairs,
        rank_histogram=dict(sorted(hist.items())),
        couples_same_location=couples_colocated(inst, m),
        n_couples=len(inst.couples),
        travel_reduction_pct=None if baseline is None else travel_reduction_pct(inst, m, baseline),
    )


def tail_bound(eps: float, sigma: float, L: float, s_size: int) -> float:
    """Upper bound on P(BP_inverse >= BP_exact + eps) under the sub-Gaussian
    and Lipschitz hypotheses; requires eps > L * sigma * sqrt(s_size)."""
    if sigma <= 0 or L <= 0 or s_size < 0:
        raise ValueError("sigma and L must be positive and s_size nonnegative")
    threshold = L * sigma * math.sqrt(s_size)
    if not eps > threshold:
        raise HypothesisViolated(f"eps={eps!r} must exceed L*sigma*sqrt(|S|)={threshold!r}")
    return math.exp(-((eps - threshold) ** 2) / (2.0 * L * L * sigma * sigma))


# ------------------------------------------------------------------- emitters
def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        out = f"{v:.6g}"
        return "0" if out == "-0" else out
    return str(v)


def table_to_csv(rows: Iterable[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def emit_csv(rows: Iterable[dict], columns: Sequence[str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(table_to_csv(rows, columns))


def report_to_json(report: MetricsReport) -> str:
    return json.dumps(report.to_json_dict(), indent=1, sort_keys=True) + "\n"


def emit_json(report: MetricsReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(report_to_json(report))


def load_report(path) -> MetricsReport:
    with open(path, encoding="utf-8") as fh:
        return MetricsReport.from_json_dict(json.load(fh))
