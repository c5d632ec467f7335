"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ArgumentError -> 1, DataError -> 2,
TrainingError -> 3, ProviderError -> 4.
"""


class HotelWattError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(HotelWattError, ValueError):
    """Invalid argument, flag, or type invariant violation."""


class MissingApiKeyError(ArgumentError):
    """Weather API key neither configured nor found in the environment."""


class DataError(HotelWattError):
    """Invalid, inconsistent, or unusable input data."""


class ParseError(DataError):
    """CSV document failed validation; message names row and column."""


class JoinError(DataError):
    """Consumption and weather series share no dates."""


class GenerationError(DataError):
    """Synthetic generator coefficients produced an impossible series."""


class MissingFeatureError(DataError):
    """A selected feature cannot be resolved for some day."""


class UndefinedCorrelationError(DataError):
    """Pearson correlation is undefined (a constant input)."""


class ShapeError(DataError):
    """Vector or matrix dimensions do not match."""


class FormatError(DataError):
    """Model document is malformed or has an unsupported version."""


class MetricDomainError(DataError):
    """Metric input outside its domain (e.g. MAPE with nonpositive actuals)."""


class TrainingError(HotelWattError):
    """Training diverged or could not run."""


class SearchError(TrainingError):
    """Hyperparameter search produced no usable trial."""


class ProviderError(HotelWattError):
    """Weather provider returned an unusable response."""


class TransportError(ProviderError):
    """Network-level failure talking to the weather provider."""


class IncompleteDataError(ProviderError):
    """Provider response is missing days inside the requested range."""
