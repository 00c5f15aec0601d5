"""Exception types raised by the solvers."""

import numpy as np


class DimensionError(ValueError):
    """Array shapes do not agree with the scenario."""


class InfeasibleError(RuntimeError):
    """The requested thresholds or dimensions admit no feasible precoder."""


class SingularMatrixError(np.linalg.LinAlgError):
    """A matrix that must be positive definite is (numerically) singular."""


class DegenerateEigenspaceError(RuntimeError):
    """No vector of a repeated top eigenspace satisfies the constraints."""
