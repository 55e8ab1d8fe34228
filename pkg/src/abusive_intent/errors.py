"""Shared exception types."""


class ConfigurationError(ValueError):
    """A configuration value violates an invariant."""


class EmbeddingFormatError(ValueError):
    """A vector file does not follow the text interchange format."""


class ScoringError(ValueError):
    """Scoring preconditions are not met (e.g. a class is empty)."""


class TrainingError(RuntimeError):
    """Training cannot proceed (single-class data, no usable weights)."""
