"""Exception types shared across the package."""


class SentarlError(Exception):
    """Base class for errors raised by this package."""


class IngestError(SentarlError):
    """A data file could not be parsed or failed validation.

    Messages include the offending file and, where applicable, the
    1-based line number.
    """


class ConfigError(SentarlError):
    """A run configuration is malformed or out of range."""


class ModelFormatError(SentarlError):
    """A serialized model file is truncated, corrupt, or has an
    unsupported format version."""


class NonFiniteGradientError(SentarlError):
    """A parameter update was rejected because the gradients contained
    NaN or infinity."""
