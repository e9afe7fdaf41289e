"""Exception hierarchy.

The CLI maps the three top-level families onto exit codes: configuration
problems exit 2, data problems exit 3, training divergence exits 4.
"""

from __future__ import annotations


class AffbenchError(Exception):
    exit_code = 1
    kind = "error"

    def __init__(self, message: str = "", hint: str | None = None):
        super().__init__(message)
        self.hint = hint


class ConfigError(AffbenchError, ValueError):
    exit_code = 2
    kind = "config_error"


class DataError(AffbenchError, ValueError):
    exit_code = 3
    kind = "data_error"


class DivergenceError(AffbenchError, RuntimeError):
    exit_code = 4
    kind = "training_divergence"

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyStructureError(DataError):
    pass


class DuplicateIdError(DataError):
    pass


class PreparationError(DataError):
    pass


class EmptyPocketError(DataError):
    pass


class GraphTooLargeError(DataError):
    pass


class UndefinedMetricError(ValueError):
    pass


class DegenerateSplitError(DataError):
    pass


class ShapeError(ValueError):
    pass


class NotFittedError(RuntimeError):
    pass


class StaleArtifactError(DataError):
    kind = "stale_artifact"


class MissingSimilarityError(DataError):
    pass


class UnknownIdError(DataError):
    pass
