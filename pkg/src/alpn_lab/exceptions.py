"""
Exception hierarchy for the ALPN laboratory.

Library modules raise these; management commands turn them into a single
machine-parsable line (see ``AlpnError.one_line``) and a nonzero exit code.
"""

from typing import Optional


class AlpnError(Exception):
    """Base class for every error raised by the laboratory."""

    error_class = 'AlpnError'
    exit_code = 3

    def __init__(self, message: str, *, field: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.field = field
        self.line = line

    def one_line(self) -> str:
        """Render as ``error=<class> [field=..|line=..] message=<text>``."""
        parts = [f"error={self.error_class}"]
        if self.field is not None:
            parts.append(f"field={self.field}")
        if self.line is not None:
            parts.append(f"line={self.line}")
        parts.append(f"message={self.message}")
        return ' '.join(parts).replace('\n', ' ')


class ConfigurationError(AlpnError):
    """Invalid configuration, shape mismatch or unusable hyperparameters."""

    error_class = 'ConfigurationError'
    exit_code = 2


class CatalogError(ConfigurationError):
    """Exercise catalog violates its invariants."""

    error_class = 'CatalogError'


class CatalogMismatchError(ConfigurationError):
    """Two artifacts were produced for different exercise catalogs."""

    error_class = 'CatalogMismatchError'


class LogFormatError(AlpnError):
    """Malformed row in an interaction-log file."""

    error_class = 'LogFormatError'
    exit_code = 2


class InvalidActionError(AlpnError):
    """Recommended exercise index is outside the catalog."""

    error_class = 'InvalidActionError'


class EpisodeFinishedError(AlpnError):
    """Attempt to step an episode that already terminated."""

    error_class = 'EpisodeFinishedError'


class NonFiniteGradientError(AlpnError):
    """An optimizer step saw NaN or infinite gradients."""

    error_class = 'NonFiniteGradientError'

    def __init__(self, message: str, tensors: list[str]):
        super().__init__(message)
        self.tensors = tensors


class TrainingDivergedError(AlpnError):
    """Training produced a non-finite objective and was aborted."""

    error_class = 'TrainingDivergedError'

    def __init__(self, message: str, *, last_checkpoint: Optional[str] = None, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint
        self.diagnostics = diagnostics or {}

    def one_line(self) -> str:
        line = super().one_line()
        if self.last_checkpoint:
            line += f" last_checkpoint={self.last_checkpoint}"
        return line


class CheckpointError(AlpnError):
    """Checkpoint file is missing, truncated or of the wrong kind."""

    error_class = 'CheckpointError'
    exit_code = 2
