"""Exception hierarchy shared by all fdbia modules."""

import numpy as np


class FdbiaError(Exception):
    """Base class for every error raised by this package."""


class InvalidDimensionError(FdbiaError, ValueError):
    pass


class InvalidRangeError(FdbiaError, ValueError):
    pass


class InvalidArgumentError(FdbiaError, ValueError):
    pass


class SingularMatrixError(FdbiaError, np.linalg.LinAlgError):
    pass


class InvalidAllocationError(FdbiaError, ValueError):
    """Symbol allocation outside the feasible (n_d, n_u) set."""


class UnsupportedTopologyError(FdbiaError, ValueError):
    """Scheme requested for a topology it does not cover (e.g. no DL users)."""


class InvalidScenarioError(FdbiaError, ValueError):
    pass


class DegenerateChannelError(FdbiaError, ArithmeticError):
    """Channel draw hit a probability-zero rank-deficient set (or numerically close to one)."""
