"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point or parameter lies outside the validated domain."""


class QuadratureError(ArithmeticError):
    """A numerical routine exhausted its refinement budget.

    Carries the best error estimate achieved so the caller can decide
    whether the partial result is still usable.
    """

    def __init__(self, message, estimate=None, budget=None):
        super().__init__(message)
        self.estimate = estimate
        self.budget = budget


class ResolutionError(ValueError):
    """Requested decomposition depth exceeds the grid resolution."""


class SplitBudgetError(ValueError):
    """Box-product diameter ratio exceeds the configured split budget."""


class CoveringHoleError(RuntimeError):
    """A point inside the covering window is not reached by any bump."""
