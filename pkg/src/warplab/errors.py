"""Exception hierarchy shared by all warplab modules."""


class WarplabError(Exception):
    """Base class for all warplab errors."""


class DomainError(WarplabError, ValueError):
    """A radius, point or parameter lies outside the domain of an operation."""


class NumericError(WarplabError, ArithmeticError):
    """A numerical routine (quadrature, ODE, finite differences) failed."""


class ImmersionDegeneracyError(WarplabError, ValueError):
    """The chart Jacobian is rank deficient at a sampled parameter."""


class MeshError(WarplabError, ValueError):
    """Mesh construction produced degenerate simplices."""

    def __init__(self, message, cells=()):
        super().__init__(message)
        self.cells = list(cells)


class ConfigError(WarplabError, ValueError):
    """Scenario configuration is malformed or violates an invariant."""
