"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`CrampError`,
which is itself a ``ValueError`` so callers that only care about bad input can
catch the builtin.
"""


class CrampError(ValueError):
    """Base class for all package errors."""


class DegenerateInputError(CrampError):
    """Input is valid in shape but degenerate for the requested quantity."""


class DimensionError(CrampError):
    """Shapes of the arguments are incompatible."""


class RankDeficiencyError(CrampError):
    """A matrix that must be nonsingular is (numerically) singular."""


class SampleSizeError(CrampError):
    """Too few observations for the requested statistic."""


class InvalidMatrixError(CrampError):
    """A matrix violates a structural invariant (symmetry, PD, ...)."""


class ConfigError(CrampError):
    """Inconsistent or unsupported configuration."""


class InvalidScenarioError(ConfigError):
    """A simulation scenario cannot produce a valid covariance matrix."""


class ParseError(CrampError):
    """Tabular input could not be parsed."""


class ArgumentError(CrampError):
    """An argument is outside its supported domain."""
