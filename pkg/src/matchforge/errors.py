"""Exception hierarchy shared by every matchforge module."""


class MatchforgeError(Exception):
    """Base class for all library errors."""


class InstanceValidationError(MatchforgeError):
    """Raised by :func:`validate_instance` with the full list of violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{v.kind}: {v.detail}" for v in self.violations[:10])
        more = "" if len(self.violations) <= 10 else f" (+{len(self.violations) - 10} more)"
        super().__init__(f"{len(self.violations)} violation(s): {lines}{more}")

    @property
    def kinds(self):
        return {v.kind for v in self.violations}


class PairNotAdmissible(MatchforgeError):
    pass


class InfeasibleMatching(MatchforgeError):
    pass


class InfeasibleConfig(MatchforgeError):
    pass


class Infeasible(MatchforgeError):
    """A model has no feasible point for the requested targets."""


class InfeasibleBudget(Infeasible):
    pass


class InfeasibleTarget(Infeasible):
    pass


class InfeasibleInverse(Infeasible):
    pass


class AllInfeasible(Infeasible):
    pass


class SolverFailure(MatchforgeError):
    """The backend could not produce a usable answer."""


class NumericalFailure(SolverFailure):
    pass


class SolverTimeLimit(SolverFailure):
    pass


class BackendUnavailable(SolverFailure):
    pass


class MalformedModel(MatchforgeError):
    pass


class ModelTooLarge(MatchforgeError):
    pass


class HypothesisViolated(MatchforgeError):
    pass
