"""Exception hierarchy shared by every module."""


class Ae2LstmError(Exception):
    """Base class; ``kind`` is the machine-readable tag the CLI prints."""

    kind = "error"


class ShapeError(Ae2LstmError, ValueError):
    kind = "shape"


class StateError(Ae2LstmError, RuntimeError):
    kind = "state"


class TrainingError(Ae2LstmError, RuntimeError):
    kind = "training"


class DataError(Ae2LstmError, ValueError):
    kind = "data"


class UsageError(Ae2LstmError, ValueError):
    kind = "usage"


class ParseError(DataError):
    kind = "parse"


class CompatibilityError(Ae2LstmError, ValueError):
    kind = "compatibility"


class FormatError(Ae2LstmError, ValueError):
    """Malformed or version-mismatched checkpoint / cache file."""

    kind = "format"


class ConfigError(UsageError):
    kind = "config"

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
