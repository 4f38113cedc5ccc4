"""Exception hierarchy.

Configuration-type errors map to CLI exit status 2, everything else
derived from :class:`CohertestError` maps to exit status 3.
"""


class CohertestError(Exception):
    """Base class for all package errors."""

    kind = "runtime"


class ConfigurationError(CohertestError, ValueError):
    """Inconsistent or invalid configuration (grid, dimensions, config file)."""

    kind = "configuration"


class ParameterError(ConfigurationError):
    """A scalar parameter is outside its admissible range."""

    kind = "parameter"


class StationarityError(ParameterError):
    """ARMA coefficients violate |phi| < 1."""

    kind = "stationarity"


class ShapeError(CohertestError, ValueError):
    """Array with the wrong shape, or a matrix that should be Hermitian is not."""

    kind = "shape"


class DomainError(CohertestError, ValueError):
    """Evaluation point on the support of the Marchenko-Pastur law."""

    kind = "domain"


class CapabilityError(CohertestError, NotImplementedError):
    """The test function does not provide the requested hook."""

    kind = "capability"


class DegenerateChannelError(CohertestError, ArithmeticError):
    """A channel has zero estimated power at some frequency."""

    kind = "degenerate_channel"


class DegenerateVarianceError(CohertestError, ArithmeticError):
    """The asymptotic variance of the statistic vanishes."""

    kind = "degenerate_variance"


class NumericalError(CohertestError, ArithmeticError):
    """A numerical routine failed its accuracy check."""

    kind = "numerical"
