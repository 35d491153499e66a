"""Exception hierarchy.

Every error derives from :class:`QMediateError` so callers (the CLI in
particular) can map whole families onto exit codes.
"""


class QMediateError(Exception):
    """Base class for all package errors."""


class ShapeError(QMediateError, ValueError):
    """Array shape does not match the circuit or model layout."""


class InvalidGateError(QMediateError, ValueError):
    """Gate definition is malformed (non-unitary, control equals target)."""


class UnsupportedGateError(QMediateError, ValueError):
    """A trainable gate is not a single-qubit Pauli rotation."""


class PartitionError(QMediateError, ValueError):
    """Bipartition indices are invalid for the given register."""


class InputError(QMediateError, ValueError):
    """Numerical input violates a precondition (e.g. non-Hermitian matrix)."""


class ConvergenceError(QMediateError, RuntimeError):
    """Iterative routine failed to converge."""


class IngestionError(QMediateError, ValueError):
    """CSV could not be parsed into a dataset."""


class PreprocessingError(QMediateError, ValueError):
    """Standardization or PCA could not be fitted."""


class DimensionError(PreprocessingError):
    """Requested dimensionality exceeds what the data supports."""


class SplitError(QMediateError, ValueError):
    """Stratified split cannot be formed."""


class SingularDesignError(QMediateError, ValueError):
    """Regression design matrix is rank deficient."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class PairingError(QMediateError, ValueError):
    """Paired observations are incomplete or malformed."""


class ConfigError(QMediateError, ValueError):
    """Experiment configuration failed validation."""


class GateFailure(QMediateError, RuntimeError):
    """A numerical acceptance gate (consistency, pure-state) failed."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
