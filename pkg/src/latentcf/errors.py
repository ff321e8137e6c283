"""Exception taxonomy shared by all modules.

Kept deliberately small: the CLI maps ConfigError to exit code 1 and every
other library error to exit code 2 (see cli.py), so new error types should
subclass one of these rather than Exception.
"""


class LatentCfError(Exception):
    """Base class for all library errors."""


class ConfigError(LatentCfError):
    """Invalid configuration or arguments (bad ranges, unknown keys, ...)."""


class ShapeError(LatentCfError):
    """Tensor shape or layout violates an interface contract."""


class DomainError(LatentCfError):
    """Value outside its mathematical domain (thresholds, norms, orderings)."""


class NumericalError(LatentCfError):
    """Numerical failure (NaN/Inf, eigenvalue residue beyond tolerance).

    Carries an optional diagnostics dict so callers can report what broke.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class TrainingError(NumericalError):
    """Training loop diverged or was handed a degenerate dataset."""


class CheckpointError(LatentCfError):
    """Checkpoint file is corrupt, truncated, or of the wrong kind/version."""


class LayerLookupError(LatentCfError):
    """Unknown activation layer name; message lists the available names."""


class DegenerateMaskError(LatentCfError):
    """Mask with empty support where the algorithm needs a nonempty one."""
