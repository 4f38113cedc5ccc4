"""Independence tests for high-dimensional complex time series based on
linear spectral statistics of the sample spectral coherence matrix."""
from .errors import (
    CapabilityError,
    CohertestError,
    ConfigurationError,
    DegenerateChannelError,
    DegenerateVarianceError,
    DomainError,
    NumericalError,
    ParameterError,
    ShapeError,
    StationarityError,
)

__version__ = "0.1.0"

from .harness import McConfig, McReport, mc_table  # noqa: E402
from .rmt import MpContext, TestFunction  # noqa: E402
from .simulate import DgpSpec, InnovationSpec, simulate_panel  # noqa: E402
from .spectral import SpectralCoherence  # noqa: E402
from .stats import CoherenceIndependenceTest, LssConfig, TestOutcome  # noqa: E402

__all__ = [
    "CapabilityError", "CohertestError", "CoherenceIndependenceTest", "ConfigurationError",
    "DegenerateChannelError", "DegenerateVarianceError", "DgpSpec", "DomainError",
    "InnovationSpec", "LssConfig", "McConfig", "McReport", "MpContext", "NumericalError",
    "ParameterError", "ShapeError", "SpectralCoherence", "StationarityError", "TestFunction",
    "TestOutcome", "mc_table", "simulate_panel", "__version__",
]
