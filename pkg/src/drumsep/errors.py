"""Exception hierarchy shared across the toolkit.

Exit-code mapping used by the CLI:
  2 -> usage / configuration problems (ConfigError and argparse failures)
  3 -> I/O and file-format problems (FileFormatError, OSError)
  4 -> numeric failures (NumericError)
"""


class DrumsepError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(DrumsepError):
    """Invalid configuration value or inconsistent settings."""


class EmptyInputError(DrumsepError):
    """An operation received zero-length audio or a zero-frame spectrogram."""


class ShapeError(DrumsepError):
    """Tensor shapes do not match the operation's contract."""


class StateError(DrumsepError):
    """Operation invoked in the wrong order (e.g. backward before forward)."""


class NumericError(DrumsepError):
    """Non-finite values or other numerical failures; fail fast."""


class DomainError(DrumsepError):
    """Input values outside the mathematical domain (e.g. negative magnitudes)."""


class AlignmentError(DrumsepError):
    """Paired signals differ in length or channel count."""


class DegenerateInputError(DrumsepError):
    """All-zero or otherwise degenerate input that the algorithm cannot process."""


class MidiParseError(DrumsepError):
    """Malformed Standard MIDI File; carries the byte offset when known."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class FileFormatError(DrumsepError):
    """Unsupported or corrupt file content (WAV, checkpoints, manifests)."""


class EvaluationError(DrumsepError):
    """Missing annotations or estimates during evaluation."""
