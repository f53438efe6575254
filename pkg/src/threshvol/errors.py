"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration/usage problems -> 1,
data-file problems -> 2, numerical failures -> 3.
"""


class ThreshvolError(Exception):
    """Base class for all package errors."""


class ConfigError(ThreshvolError):
    """Invalid configuration: unknown key, missing key, out-of-range value."""


class DataError(ThreshvolError):
    """Malformed or inconsistent input data (observation files, tables)."""


class EstimationError(ThreshvolError):
    """Numerical failure during estimation (insufficient local data, etc.)."""


class SimulationError(ThreshvolError):
    """Failure while simulating a path (divergence, invalid thinning bound)."""


class ExperimentError(ThreshvolError):
    """A Monte Carlo experiment is misconfigured (e.g. too many failed replicates)."""


class QuadratureError(ThreshvolError):
    """Kernel-moment quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, achieved_tol: float):
        super().__init__(message)
        self.achieved_tol = achieved_tol
