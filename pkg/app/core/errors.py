from typing import Optional


class D2DError(Exception):
    """Base class for every failure the toolkit reports on purpose."""
    exit_code = 1


class ConfigError(D2DError):
    exit_code = 2


class NumericalError(D2DError):
    exit_code = 3


class QuadratureError(NumericalError):
    """An adaptive quadrature did not reach its requested tolerance."""


class SignificanceLossError(NumericalError):
    """An alternating binomial sum cancelled beyond what double precision can resolve."""


class InfeasibleError(D2DError):
    exit_code = 4

    def __init__(self, message: str, best_reliability: Optional[float] = None, tau_cap: Optional[int] = None):
        super().__init__(message)
        self.best_reliability = best_reliability
        self.tau_cap = tau_cap
