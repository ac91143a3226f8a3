"""Correlated continuous-time random walks: simulation, limit processes and fractional PDEs."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigurationError,
    CtrwError,
    DomainTooSmallError,
    NumericError,
    ParameterError,
    RangeError,
)
from .stable_rng import RngStream, StableParams, WaitingTimeLaw  # noqa: F401
