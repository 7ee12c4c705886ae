"""Numerical weak KAM and Aubry-Mather toolbox for contact Hamiltonian
systems H(x, u, p) on flat tori (d = 1 or 2).

Submodules follow the pipeline: models (Hamiltonian families), grids
(periodic fields), semigroup (discrete solution semigroups), action
(implicit action functions), weakkam (backward/forward weak KAM solutions),
aubry (barrier and Aubry/Mather set estimates), flow (contact flow and
calibrated curves), critical (Mane critical values and admissibility),
cli (configuration and subcommands).
"""

from .errors import (
    BlowupError,
    ConfigError,
    ConsistencyError,
    ContactKamError,
    ConvergenceError,
    NumericalError,
    ToleranceError,
    UsageError,
)
from .grids import GridField, PeriodicGrid, constant_field, field_from_function
from .models import ContactPoint, HamiltonianModel, make_model

__all__ = [
    "BlowupError",
    "ConfigError",
    "ConsistencyError",
    "ContactKamError",
    "ContactPoint",
    "ConvergenceError",
    "GridField",
    "HamiltonianModel",
    "NumericalError",
    "PeriodicGrid",
    "ToleranceError",
    "UsageError",
    "constant_field",
    "field_from_function",
    "make_model",
]

__version__ = "0.1.0"
