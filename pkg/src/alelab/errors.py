"""Exception types shared across the package."""


class AleLabError(Exception):
    """Base class for all errors raised by alelab."""


class DomainError(AleLabError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularityError(AleLabError, ArithmeticError):
    """Evaluation landed on (or too close to) a singular point of a slit map.

    ``event_index`` is set when the failure happened inside a composition.
    """

    def __init__(self, message, event_index=None):
        super().__init__(message)
        self.event_index = event_index


class GeometryError(AleLabError):
    """Tip bookkeeping broke down (e.g. a tip fell into a new particle's base)."""


class ConstructionError(AleLabError):
    """An initial configuration could not be realized to the requested tolerance."""


class NumericError(AleLabError, ArithmeticError):
    """A quadrature or solver failed to reach the requested accuracy."""


class BudgetError(AleLabError):
    """A run would exceed its particle or step budget."""
