"""Exception types shared across the toolkit."""


class DdroError(Exception):
    """Base class for all toolkit errors."""


class ExprError(DdroError):
    """Base class for expression language errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class ExprNameError(ExprError):
    def __init__(self, name, offset):
        super().__init__(f"unknown identifier '{name}' (offset {offset})")
        self.name = name
        self.offset = offset


class ExprIndexError(ExprError):
    def __init__(self, name, index, limit, offset):
        super().__init__(
            f"variable '{name}' index {index} out of range 1..{limit} (offset {offset})"
        )
        self.offset = offset


class ExprDomainError(ExprError):
    """Raised at evaluation time: log(t<=0), sqrt(t<0), division by zero."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class SpecError(DdroError):
    """A problem specification failed validation; carries the diagnostics."""

    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = list(diagnostics)


class LpError(DdroError):
    """Malformed linear program (dimension mismatch, non-finite data)."""


class LpIterationError(DdroError):
    """Simplex iteration cap exceeded."""


class AmbiguityEmptyError(DdroError):
    """The ambiguity set is empty at the queried decision.

    The reformulation theorems presume a nonempty set at every feasible
    decision, so an empty set is an input error, not a solver failure.
    """


class SlaterError(DdroError):
    """The strict-feasibility hypothesis needed for strong duality fails."""


class RecourseInfeasibleError(DdroError):
    """Second-stage problem infeasible: complete recourse violated."""

    def __init__(self, x, scenario_index):
        super().__init__(
            "complete recourse violated at x=%s, scenario %d"
            % (list(map(float, x)), scenario_index)
        )
        self.x = x
        self.scenario_index = scenario_index


class ParameterError(DdroError):
    """A decision-dependent parameter evaluated outside its admissible range."""


class ToleranceError(DdroError):
    """An iterative method exhausted its budget before reaching tolerance."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NonterminationError(DdroError):
    """Exchange loop hit its iteration cap; carries the best state found."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ConsistencyError(DdroError):
    """Internal cross-check failed (e.g. assembled multiplier infeasible)."""
