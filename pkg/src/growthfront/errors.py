"""Exception hierarchy shared by all growthfront modules."""


class GrowthFrontError(Exception):
    """Base class for every error raised by this package."""


class DomainError(GrowthFrontError, ValueError):
    """An argument lies outside the domain of the operation (e.g. r < 0)."""


class ExtrapolationError(GrowthFrontError, ValueError):
    """A tabulated metric was evaluated beyond its last sample without a tail model."""


class InsufficientDataError(GrowthFrontError, ValueError):
    pass


class UnsupportedMetricError(GrowthFrontError):
    """The operation has no backend for this metric kind."""


class SingularMetricError(GrowthFrontError):
    pass


class UnreachableError(GrowthFrontError):
    """The escape-path angle never reaches the requested target.

    ``sup_alpha`` holds the supremum of the swept angle, which is finite
    exactly when the tail integral of 1/G converges.
    """

    def __init__(self, message, sup_alpha):
        super().__init__(message)
        self.sup_alpha = sup_alpha


class NumericError(GrowthFrontError):
    pass


class PreconditionError(GrowthFrontError, ValueError):
    pass


class InvalidStateError(GrowthFrontError):
    pass


class ResourceError(GrowthFrontError):
    """Requested grid exceeds the configured node cap."""


class ContractViolation(GrowthFrontError):
    pass
