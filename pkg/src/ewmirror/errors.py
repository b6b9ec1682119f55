"""Exception hierarchy.

The CLI maps these onto exit codes: configuration problems exit with 1,
physically infeasible settings (no bounce) with 2, numerical failures with 3.
"""


class EwMirrorError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(EwMirrorError, ValueError):
    exit_code = 1


class InvalidMediumError(EwMirrorError, ValueError):
    """Refractive index does not allow total internal reflection (n <= 1)."""


class SupercriticalAngleError(EwMirrorError, ValueError):
    """Angle of incidence must exceed the critical angle."""


class ResonantDetuningError(EwMirrorError, ValueError):
    """Zero detuning: the dispersive expressions diverge."""


class DetuningSignError(EwMirrorError, ValueError):
    """Red detuning (or a crossed hyperfine line) gives no repulsive barrier."""


class DomainError(EwMirrorError, ValueError):
    """Potential evaluated below the near-surface cutoff."""


class NoBounceError(EwMirrorError):
    """The barrier is lower than the incident kinetic energy."""

    exit_code = 2


class ThresholdNotFoundError(EwMirrorError):
    exit_code = 2


class IntegrationError(EwMirrorError, RuntimeError):
    """Numerical integration or root bracketing failed."""

    exit_code = 3


class NoSignalError(EwMirrorError):
    """Image region contains no counts above background."""

    exit_code = 2


class FitError(EwMirrorError, ValueError):
    exit_code = 3


class CorrectionError(EwMirrorError, ValueError):
    """A correction was applied to data that already carries it."""
