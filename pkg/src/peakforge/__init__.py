"""peakforge: numerical construction and verification of concentrating multi-peak
solutions of (-Delta)^s u + V u = u^{p_s - eps} on periodic grids."""

__version__ = "0.1.0"

from .errors import ConfigError, PeakforgeError, SolverError, VerificationError
from .field_ops import Field, FracOrder, Grid, PeakConfig, make_grid

__all__ = [
    "__version__",
    "PeakforgeError",
    "ConfigError",
    "VerificationError",
    "SolverError",
    "Field",
    "FracOrder",
    "Grid",
    "PeakConfig",
    "make_grid",
]
