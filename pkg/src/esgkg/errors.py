"""Exception hierarchy shared by every stage.

Each error class carries the process exit code the CLI reports for it:
1 usage/config, 2 data integrity, 3 provider/transport.
"""

from __future__ import annotations


class EsgKgError(Exception):
    exit_code = 1


class UsageError(EsgKgError):
    exit_code = 1


class ConfigError(EsgKgError):
    exit_code = 1


class PolicyError(ConfigError):
    """A live provider call was attempted while the gateway is offline."""


class MissingFixtureError(PolicyError):
    def __init__(self, digest: str, message: str | None = None):
        self.digest = digest
        super().__init__(message or f"missing fixture for prompt digest {digest}")


class IntegrityError(EsgKgError):
    exit_code = 2


class ParseError(IntegrityError):
    """Malformed input record; ``position`` names the file line or record."""

    def __init__(self, message: str, *, source: str | None = None, position: int | None = None):
        self.source = source
        self.position = position
        where = ""
        if source is not None:
            where = f"{source}"
            if position is not None:
                where += f":{position}"
            where += ": "
        super().__init__(f"{where}{message}")


class StateError(IntegrityError):
    pass


class GenerationError(IntegrityError):
    """Model output could not be turned into the expected structure."""

    def __init__(self, message: str, raw: str | None = None):
        self.raw = raw
        super().__init__(message)


class ExtractionError(GenerationError):
    pass


class TransportError(EsgKgError):
    exit_code = 3

    def __init__(self, message: str, status: int | None = None, retryable: bool = False):
        self.status = status
        self.retryable = retryable
        super().__init__(message if status is None else f"{message} (status {status})")
