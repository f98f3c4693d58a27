"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: configuration and
validation problems exit 1, numerical (solver / bracketing) failures
exit 2.
"""


class PairsimError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PairsimError):
    """Invalid configuration, model file, or argument combination."""


class ValidityRangeError(ConfigError):
    """An input falls outside a model's stated validity range."""


class SolverError(PairsimError):
    """A numerical routine failed to produce a result."""


class NoSolutionError(SolverError):
    """Root bracketing failed: no sign change over the search interval.

    ``endpoint_values`` carries the function values at the bracket ends
    so the caller can see how far off the bracket was.
    """

    def __init__(self, message, endpoint_values=None):
        super().__init__(message)
        self.endpoint_values = endpoint_values


class SpectralAnomalyError(SolverError):
    """A spectral feature (e.g. a half-maximum point) could not be located
    within the expected search span."""
