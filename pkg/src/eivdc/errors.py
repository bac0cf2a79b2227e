"""Exception hierarchy shared across the package.

Every exception carries a machine-readable ``error_class`` that the service
layer returns verbatim and the CLI maps to exit codes:
``usage`` -> 2, ``data`` -> 3, ``degeneracy`` -> 4, ``calibration`` -> 5.
"""


class EivError(Exception):
    """Base class for all library errors."""

    error_class = "data"


class ParameterError(EivError):
    """Invalid argument or configuration value."""

    error_class = "usage"


class SchemaError(EivError):
    """Input file does not provide the columns named by the schema."""

    error_class = "data"


class ParseError(EivError):
    """A cell could not be parsed as a number (includes missing cells)."""

    error_class = "data"


class DataError(EivError):
    """Input data violates a structural invariant (e.g. duplicate keys)."""

    error_class = "data"


class NotFoundError(EivError):
    """A requested key (e.g. a year) is absent from the data."""

    error_class = "data"


class InsufficientDataError(EivError):
    """Too few observations for the requested operation."""

    error_class = "data"


class SingularDesignError(EivError):
    """Design or control matrix is rank deficient."""

    error_class = "degeneracy"


class NearSingularDenominatorError(EivError):
    """Third-moment denominator is numerically indistinguishable from zero.

    Signals that the latent slope or the latent third moment is (close to)
    zero, where the moment-ratio estimator is ill-defined.
    """

    error_class = "degeneracy"


class DegenerateBlockError(EivError):
    """A subsample ratio has an exactly-zero denominator."""

    error_class = "degeneracy"


class DivisibilityError(EivError):
    """Sample size is not divisible by twice the block count."""

    error_class = "degeneracy"


class TooManyBlocksError(EivError):
    """More blocks requested than the sample can support."""

    error_class = "degeneracy"


class DegeneracyError(EivError):
    """A sample covariance matrix required to be invertible is singular."""

    error_class = "degeneracy"


class CalibrationError(EivError):
    """Requested outcome variance is below the systematic-part variance."""

    error_class = "calibration"
