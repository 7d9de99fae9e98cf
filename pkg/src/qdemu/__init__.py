"""Neural emulation of 1D quantum wave-packet dynamics."""
from .errors import MissingInputError, NumericalError
from .sim import GaussianPacketSpec, PotentialSpec, SimGrid, Trajectory

__version__ = "0.1.0"

__all__ = [
    "GaussianPacketSpec",
    "MissingInputError",
    "NumericalError",
    "PotentialSpec",
    "SimGrid",
    "Trajectory",
]
