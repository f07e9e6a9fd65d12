"""Exception hierarchy shared by every module of the package."""


class SyncProbError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(SyncProbError, ValueError):
    """An argument lies outside its admissible range."""


class ContractViolation(SyncProbError):
    """An input breaks a documented precondition (e.g. asymmetric matrix)."""


class NonUniqueManifoldError(SyncProbError):
    """The Laplacian has nullity > 1, so the synchronization manifold is not unique."""


class DivergenceError(SyncProbError):
    """Numerical integration blew up or the step size underflowed."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class NoLimitCycleError(SyncProbError):
    """No Poincare-section crossing was found within the integration horizon."""


class UnstableModeError(SyncProbError):
    """A transverse mode has a non-positive decay rate."""

    def __init__(self, message, mu=None):
        super().__init__(message)
        self.mu = mu
