"""Precoder optimization for SWIPT multi-user MIMO cognitive-radio downlinks."""

from .core import (ChannelSet, NetworkScenario, Precoder, SolveReport, Utility,
                   constraint_residuals, harvested_power, interference_power,
                   rate_per_user, sum_utility)
from .errors import (DegenerateEigenspaceError, DimensionError, InfeasibleError,
                     SingularMatrixError)

__version__ = "0.1.0"
