"""Exception hierarchy shared by all solver modules."""


class MemsError(Exception):
    """Base class for every error raised by this package."""


class InvalidSpec(MemsError, ValueError):
    pass


class DomainMismatch(MemsError, ValueError):
    pass


class SingularSystem(MemsError, ArithmeticError):
    pass


class NoConvergence(MemsError, RuntimeError):
    pass


class FieldOutOfRange(MemsError, ValueError):
    pass


class NoSteadyState(MemsError, RuntimeError):
    """Raised when the minimal-solution iteration cannot settle (lambda beyond the fold)."""


class EmptyBranch(MemsError, ValueError):
    pass


class RootOutOfRange(MemsError, ValueError):
    """Raised when lambda exceeds the resolvable range of the scalar root map."""


class UnsupportedDomain(MemsError, ValueError):
    pass


class InvalidInitialData(MemsError, ValueError):
    pass


class NonFiniteState(MemsError, FloatingPointError):
    pass


class IncompatibleRuns(MemsError, ValueError):
    pass


class NotConverged(MemsError, RuntimeError):
    pass


class InvalidParams(MemsError, ValueError):
    pass


class CeilingViolation(MemsError, RuntimeError):
    """A Picard iterate rose above the (1 + a)/2 ceiling; indicates a discretization bug."""


class InsufficientSamples(MemsError, ValueError):
    pass


class HypothesisViolated(MemsError, ValueError):
    pass


class ConfigError(MemsError, ValueError):
    pass
