"""Exception types shared across the package.

Plain ``ValueError`` is used for scalar precondition violations (negative
distance, non-unit direction, out-of-range kappa).  The classes below mark
conditions a caller is expected to branch on or report to an operator; the
CLI maps any of them to exit status 1.
"""


class EmuSafetyError(Exception):
    """Base class for all domain errors raised by this package."""


class TrialFormatError(EmuSafetyError):
    """Malformed trial or annotation input; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnknownCueError(TrialFormatError):
    """Cue token outside the coding-scheme vocabulary."""


class EmptyMatrixError(EmuSafetyError):
    """No trials left to populate a risk matrix."""


class BinCoverageError(EmuSafetyError):
    """A distance bin has no defined cells to interpolate over."""


class CurveFitError(EmuSafetyError):
    """Not enough crossings (or degenerate data) to fit an expectation curve."""


class ConfigurationError(EmuSafetyError):
    """Invalid or incomplete configuration (safety curves, bundles, models)."""


class MissingCurveError(ConfigurationError):
    """No safety curve configured for a (body part, curvature) pair."""


class PolicyError(ConfigurationError):
    """Condition token that the condition policy cannot resolve."""


class ModelError(EmuSafetyError):
    """Arm model is structurally invalid or numerically singular."""


class StallError(EmuSafetyError):
    """Approach simulation stopped making progress within its step budget."""
