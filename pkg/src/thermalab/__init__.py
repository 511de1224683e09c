"""Random-matrix laboratory for thermalization in chaotic quantum systems."""

from . import bgs, dynamics, ensemble, eth, matcore, spectral
from .errors import ThermalabError

__version__ = "0.1.0"

__all__ = ["bgs", "dynamics", "ensemble", "eth", "matcore", "spectral", "ThermalabError"]
