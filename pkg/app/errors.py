"""
Exception hierarchy shared by the library, the CLI and the HTTP service.

The CLI maps these onto its exit codes and the service onto HTTP status codes.
"""


class FueterCheckError(Exception):
    """Base class for every error raised by the toolkit."""
    pass


class ConfigError(FueterCheckError):
    """Malformed run configuration, suite file or field/domain spec."""
    pass


class PreconditionError(FueterCheckError, ValueError):
    """A documented precondition of an operation is violated."""
    pass


class QuaternionDomainError(PreconditionError):
    """Operation undefined at the given quaternion (e.g. inverse of zero)."""
    pass


class CoincidentPointsError(PreconditionError):
    """The kernel E(q, p) was requested at q = p."""
    pass


class AxisProximityError(PreconditionError):
    """Angular derivative requested too close to the t + zk plane."""
    pass


class NumericalEvaluationError(FueterCheckError):
    """A field produced a non-finite value at a quadrature or stencil node."""
    pass


class UnknownCheckError(ConfigError):
    """The requested check name is not registered."""
    pass
