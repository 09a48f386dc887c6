"""Exception types shared across the package."""


class QcdistError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(QcdistError):
    """Operands have incompatible dimensions."""


class NotSPDError(QcdistError):
    """A matrix required to be symmetric positive definite is not."""


class DomainError(QcdistError):
    """A point lies outside the domain a field or map is defined on."""


class SingularJacobianError(QcdistError):
    """A map's Jacobian is numerically singular at the evaluation point."""


class InverseUnavailableError(QcdistError):
    """The operation needs a declared inverse the map does not carry."""


class ValidationError(QcdistError):
    """Construction-time validation of a catalog object failed."""


class GroupValidationError(QcdistError):
    """A declared group fails closure, inverse, or distortion-bound checks."""


class NumericalFaultError(QcdistError):
    """An internal consistency certificate failed; results are unreliable."""


class ConfigError(QcdistError):
    """A run configuration violates the schema."""
