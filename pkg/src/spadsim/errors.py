"""Exception hierarchy shared across the package.

``DataError`` and its subclasses signal malformed or inconsistent input
data; they map to exit code 2 in the CLI. Plain ``OSError`` maps to 3.
"""


class SpadSimError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(SpadSimError, ValueError):
    """Invalid sensor/scene parameters or an inconsistent pipeline request."""


class DataError(SpadSimError):
    """Input data is malformed, truncated, or inconsistent."""


class FormatError(DataError):
    """A container does not match the expected magic, version, or layout."""


class TruncationError(DataError):
    """A payload ended before its declared length."""

    def __init__(self, message: str, expected: int, actual: int):
        super().__init__(f"{message}: expected {expected} bytes, got {actual}")
        self.expected = expected
        self.actual = actual


class CorruptionError(DataError):
    """A record violates the container invariants (bounds or ordering)."""

    def __init__(self, message: str, record_index: int):
        super().__init__(f"record {record_index}: {message}")
        self.record_index = record_index


class CountMismatchError(DataError):
    """Paired inputs disagree on the number of samples."""


class UndefinedNormalizationError(DataError):
    """Normalization cannot be fitted: no strictly positive values."""


class StreamWriteError(SpadSimError, OSError):
    """Writing an event stream failed partway through."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (after {offset} bytes)")
        self.offset = offset
