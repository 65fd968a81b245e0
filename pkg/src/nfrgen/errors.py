"""Exception types shared across the package."""
from __future__ import annotations


class NfrgenError(Exception):
    """Base class for every error raised by this package."""


class ArgumentError(NfrgenError, ValueError):
    """An operation was called with arguments that violate its contract."""


class CapacityError(ArgumentError):
    """More items were requested than the available pool can supply."""

    def __init__(self, message: str, *, requested: int | None = None,
                 available: int | None = None):
        super().__init__(message)
        self.requested = requested
        self.available = available


class EmptyInputError(ArgumentError):
    """An operation that needs at least one input record received none."""


class RowParseError(NfrgenError):
    """A structurally malformed row was encountered while parsing input."""

    def __init__(self, row_number: int, raw: str, reason: str = "malformed row"):
        super().__init__(f"row {row_number}: {reason}: {raw!r}")
        self.row_number = row_number
        self.raw = raw
        self.reason = reason


class ResponseParseError(NfrgenError):
    """A model response contained no parsable structured block."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class UnknownAttributeError(NfrgenError):
    """A name did not resolve to any catalog quality attribute."""

    def __init__(self, name: str):
        super().__init__(f"unknown quality attribute: {name!r}")
        self.name = name


class ConfigurationError(NfrgenError):
    """Invalid or conflicting gateway/service configuration."""


class RoutingError(ConfigurationError):
    """A model references a provider that has not been registered."""


class TransportError(NfrgenError):
    """A provider request failed at the transport level."""

    def __init__(self, message: str, *, status: int | None = None,
                 retryable: bool = True, attempts: int = 1):
        super().__init__(message)
        self.status = status
        self.retryable = retryable
        self.attempts = attempts


class RequestTimeoutError(TransportError):
    """A provider request exceeded its configured timeout."""

    def __init__(self, message: str, *, attempts: int = 1):
        super().__init__(message, status=None, retryable=True, attempts=attempts)


class CredentialError(TransportError):
    """Authentication with a provider failed; never retried."""

    def __init__(self, message: str, *, status: int | None = None):
        super().__init__(message, status=status, retryable=False)


class IntegrityError(NfrgenError):
    """Stored artifacts are internally inconsistent or corrupt."""


class FormatVersionError(IntegrityError):
    """A persisted file declares a schema version this code does not read."""

    def __init__(self, found: object, expected: int):
        super().__init__(f"unsupported format_version {found!r} (expected {expected})")
        self.found = found
        self.expected = expected


class ValidationError(NfrgenError):
    """A submitted value fails domain validation (range, vocabulary)."""


class AuthorizationError(NfrgenError):
    """The acting evaluator is not assigned the referenced item."""


class NotFoundError(NfrgenError):
    """The requested entity does not exist."""


class SampleFrozenError(NfrgenError):
    """The sample was frozen by an admin; submissions are read-only."""
