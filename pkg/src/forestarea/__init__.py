"""Forest area estimation by dominant tree species from field plots and a classified map."""

from .domains import Domain, SamplePlot
from .errors import (
    DegenerateModelError,
    EmptyGroupError,
    ForestAreaError,
    GateError,
    InputError,
    NumericError,
    VarianceUndefinedError,
)
from .estimation import (
    Estimate,
    Stratum,
    build_poststrata,
    direct_estimate,
    model_assisted_estimate,
    poststratified_estimate,
    relative_efficiency,
)

__version__ = "0.1.0"

__all__ = [
    "Domain", "SamplePlot", "Estimate", "Stratum", "build_poststrata", "direct_estimate",
    "model_assisted_estimate", "poststratified_estimate", "relative_efficiency",
    "ForestAreaError", "InputError", "NumericError", "DegenerateModelError", "EmptyGroupError",
    "VarianceUndefinedError", "GateError",
]
