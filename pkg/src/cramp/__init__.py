"""Covariance-matrix hypothesis tests via random projections."""

__version__ = "0.1.0"

from ._backend import get_backend, set_backend
from .engine import CrampConfig, CrampOutcome, critical_value, cramp_test, null_distribution
from .errors import CrampError
from .linalg import (
    RefDistribution,
    RngStream,
    chi2_sf,
    eigenvalues_sym,
    normal_sf,
    sample_covariance,
    trace_power,
)
from .methods import MethodSpec, evaluate
from .result import TestResult
