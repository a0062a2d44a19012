"""Exception types shared across the package."""


class FraclapError(Exception):
    """Base class for all errors raised by this package."""


class MeshError(FraclapError):
    """Invalid boundary mesh (open, self-intersecting, degenerate, ...)."""


class QuadratureError(FraclapError):
    """A quadrature rule failed to converge within its budget."""


class SingularOperatorError(FraclapError):
    """The Galerkin matrix could not be factorized, even with pivoting."""


class ConfigError(FraclapError):
    """Invalid or unparseable run configuration."""
