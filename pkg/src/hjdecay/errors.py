"""Exception types shared across the package."""


class HJDecayError(Exception):
    """Base class for all errors raised by this package."""


class PreconditionError(HJDecayError, ValueError):
    """An input violates a documented precondition."""


class DomainError(PreconditionError):
    """A query lies outside the region where a function is represented."""


class NonConvexInputError(PreconditionError):
    """Sampled data fails the discrete convexity test.

    Attributes
    ----------
    index : tuple of int
        Grid index of the first offending interior point.
    axis : int
        Axis along which the second difference is negative.
    """

    def __init__(self, index, axis, second_difference):
        self.index = tuple(int(i) for i in index)
        self.axis = int(axis)
        self.second_difference = float(second_difference)
        super().__init__(
            f"not convex at index {self.index} along axis {self.axis} "
            f"(second difference {self.second_difference:.3e})")


class NumericalFailure(HJDecayError, RuntimeError):
    """A numerical procedure failed to certify its own result."""


class UnresolvedMinimizerError(NumericalFailure):
    """The Hopf-Lax search ball could not be shown to contain the minimizer."""


class NetBudgetError(NumericalFailure):
    """No covering net was found inside the admissible set within the budget."""

    def __init__(self, message, covered_fraction=None, searched_radius=None):
        self.covered_fraction = covered_fraction
        self.searched_radius = searched_radius
        super().__init__(message)


class ConfigError(HJDecayError, ValueError):
    """An experiment configuration is invalid."""


class NDViolation(HJDecayError):
    """The non-degeneracy check found a linear direction."""

    def __init__(self, report):
        self.report = report
        super().__init__(f"non-degeneracy violated: {len(report.witnesses)} witness(es)")
