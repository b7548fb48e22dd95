"""Numerical stability experiments for self-similar blowup of corotational
wave maps and equivariant Yang-Mills fields in similarity coordinates."""

from .coords import CoordChart, Event, HeightFunction, from_physical, light_cone_radius, to_physical
from .discretize import RadialGrid, StateVector, build_grid
from .errors import (BlowlabError, CheckFailure, ConfigurationError, DivergenceError, DomainError,
                     SingularityError, TuningError)
from .models import Model

__version__ = "0.1.0"

__all__ = [
    "BlowlabError", "CheckFailure", "ConfigurationError", "CoordChart", "DivergenceError",
    "DomainError", "Event", "HeightFunction", "Model", "RadialGrid", "SingularityError",
    "StateVector", "TuningError", "build_grid", "from_physical", "light_cone_radius", "to_physical",
]
