"""Exception types shared across the package."""


class DgslowError(Exception):
    """Base class for all package-specific errors."""


class EmptyUtterance(DgslowError):
    """A sentence produced no tokens."""


class EmptyReference(DgslowError):
    """A reference response has no tokens."""


class ParseError(DgslowError):
    """A JSONL line is not valid JSON."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class SchemaError(DgslowError):
    """A record is valid JSON but does not match the dialogue schema."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ConfigError(DgslowError):
    """An invalid configuration value."""


class ModelNotReady(DgslowError):
    """Generation requested from an untrained victim."""


class NumericalError(DgslowError):
    """A loss or gradient came out non-finite."""


class ContractError(DgslowError):
    """A result object is missing data its consumer requires."""


class VersionError(DgslowError):
    """A checkpoint or report was written by an incompatible version."""


class EmptyReport(DgslowError):
    """Report aggregation over zero records."""


class VictimConnectionError(ConnectionError, DgslowError):
    """A remote victim endpoint could not be reached.

    Subclasses the builtin ConnectionError so callers can catch either.
    """

    def __init__(self, message: str, retries: int = 0):
        super().__init__(f"{message} (after {retries} retries)" if retries else message)
        self.retries = retries


class ProtocolError(DgslowError):
    """A remote victim speaks an incompatible wire protocol."""

    def __init__(self, message: str, version: str | None = None):
        super().__init__(message)
        self.version = version


class NumericalWarning(UserWarning):
    """Emitted when a probability had to be clamped before taking a log."""


class CorpusLineWarning(UserWarning):
    """Emitted for skipped JSONL lines when strict parsing is off."""
