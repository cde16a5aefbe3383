"""Exception hierarchy shared across the package."""


class PgpfrError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(PgpfrError, ValueError):
    """A function was called with an argument that violates its contract."""


class InvalidStateError(PgpfrError, RuntimeError):
    """An operation was attempted on an object in the wrong state."""


class DatasetFormatError(PgpfrError, ValueError):
    """A dataset file is structurally malformed (bad magic, truncation, ...)."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class DatasetValidationError(PgpfrError, ValueError):
    """A dataset file parsed cleanly but its contents violate invariants."""


class ConfigError(PgpfrError, ValueError):
    """An experiment config file is malformed or contains unknown keys."""
