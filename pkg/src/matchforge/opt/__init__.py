"""Solver-agnostic math-programming layer.

``solve`` dispatches to a backend chosen by argument, by the
``MATCHFORGE_BACKEND`` environment variable, or by default (``highs``).
Continuous QPs go to Clarabel whenever it is installed, whatever the backend.
"""

from __future__ import annotations

import os

from ..errors import BackendUnavailable
from . import clarabel_qp, highs_backend, scipy_backend
from .model import INF, OptModel, OptSolution, Status, lp_certificate_residuals

BACKENDS = {highs_backend.NAME: highs_backend, scipy_backend.NAME: scipy_backend}
ENV_VAR = "MATCHFORGE_BACKEND"

__all__ = ["INF", "OptModel", "OptSolution", "Status", "lp_certificate_residuals",
           "solve", "backend_name", "supports_qp"]


def backend_name(name: str | None = None) -> str:
    name = name or os.environ.get(ENV_VAR) or highs_backend.NAME
    if name not in BACKENDS:
        raise BackendUnavailable(f"unknown backend {name!r}; choose from {sorted(BACKENDS)}")
    if not BACKENDS[name].available():
        raise BackendUnavailable(f"backend {name!r} is not installed")
    return name


def supports_qp(name: str | None = None) -> bool:
    return clarabel_qp.available() or backend_name(name) == highs_backend.NAME


def solve(model: OptModel, time_limit: float | None = None, gap: float = 1e-6,
          backend: str | None = None) -> OptSolution:
    model.validate()
    if model.is_qp and not model.is_mip and clarabel_qp.available():
        backend_name(backend)
        return clarabel_qp.solve(model, time_limit=time_limit)
    return BACKENDS[backend_name(backend)].solve(model, time_limit=time_limit, gap=gap)
