"""Exception types raised by the pipeline modules.

Every error condition in the library maps to one of these classes so callers
can distinguish failure modes without parsing messages. All inherit from
``EngageKitError`` (itself a ``ValueError``), so blanket handling stays easy.
"""


class EngageKitError(ValueError):
    """Base class for all library errors."""


# -- signals and spectra ----------------------------------------------------

class InvalidBandError(EngageKitError):
    """Frequency band outside (0, Nyquist) or otherwise malformed."""


class TooShortError(EngageKitError):
    """Signal too short (or too coarsely sampled) for the operation."""


class FlatSignalError(EngageKitError):
    """Signal has no in-band power, so a normalized PSD is undefined."""


class EmptyInputError(EngageKitError):
    """An input sequence that must be non-empty is empty."""


# -- contrastive sampling and losses ---------------------------------------

class InvalidWindowError(EngageKitError):
    """Requested time window does not fit the data or the allowed sizes."""


class InvalidCountError(EngageKitError):
    """Requested sample count is not positive."""


class DegeneratePairsError(EngageKitError):
    """Fewer than two samples: the positive-pair denominator is zero."""


class ShapeError(EngageKitError):
    """Mismatched array shapes or lengths between paired inputs."""


class DivergenceError(EngageKitError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


# -- pulse and HRV ----------------------------------------------------------

class InsufficientPeaksError(EngageKitError):
    """Fewer than two detected peaks, so no inter-beat interval exists."""


class InsufficientDataError(EngageKitError):
    """Too few inter-beat intervals for the requested features."""


class InsufficientDurationError(EngageKitError):
    """Interval series spans less time than frequency features require."""


class DegenerateSpectrumError(EngageKitError):
    """Tachogram spectrum has zero combined LF+HF power."""


# -- tabular inputs ---------------------------------------------------------

class SchemaError(EngageKitError):
    """A required column is missing from an input table."""


class ParseError(EngageKitError):
    """A cell could not be parsed as a number."""


class EmptyWindowError(EngageKitError):
    """No frames fall inside an averaging window; caller drops the sample."""


class InvalidSetError(EngageKitError):
    """Unknown behavioral feature-set id."""


# -- classification and evaluation ------------------------------------------

class InvalidKError(EngageKitError):
    """k exceeds the number of training rows (or is not positive)."""


class StratificationError(EngageKitError):
    """A class has too few samples for a stratified split."""


class InvalidConfigError(EngageKitError):
    """Invalid pipeline or cross-validation configuration."""


class InvalidSpecError(EngageKitError):
    """Synthetic-data specification violates its own constraints."""
