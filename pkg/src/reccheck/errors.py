"""Exception hierarchy. Each family maps to one CLI exit code."""


class RecCheckError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(RecCheckError):
    """Invalid configuration or unsatisfiable test spec."""

    exit_code = 1


class DataError(RecCheckError):
    """Malformed or inconsistent input data."""

    exit_code = 2


class TrainingError(RecCheckError):
    """Embedding training could not proceed or diverged."""

    exit_code = 2


class ContractViolation(RecCheckError):
    """A local model returned predictions breaking the prediction contract."""

    exit_code = 1


class RemoteModelError(RecCheckError):
    """The remote model failed, timed out, or answered malformed payloads."""

    exit_code = 3


class ReportError(RecCheckError):
    """A report could not be parsed or two reports cannot be compared."""

    exit_code = 2
