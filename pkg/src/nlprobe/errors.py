"""Exception types shared across the package.

The CLI maps these onto process exit codes (see ``nlprobe.cli``).
"""


class NlprobeError(Exception):
    """Base class for all package errors."""


class ConfigError(NlprobeError, ValueError):
    """Invalid configuration value or unknown key."""


class InvalidDescriptorError(ConfigError):
    """A phantom or envelope descriptor violates its invariants."""


class UnsupportedGeometryError(NlprobeError, ValueError):
    pass


class SetupError(ConfigError):
    """Initial data or measurement band incompatible with the phantom/grid."""


class DivergenceError(NlprobeError, ArithmeticError):
    """Non-finite values produced by an integrator."""

    def __init__(self, message, step=None, s=None):
        super().__init__(message)
        self.step = step
        self.s = s


class DegenerateAmplitudeError(NlprobeError, ValueError):
    pass


class AmbiguousBranchError(NlprobeError, ValueError):
    pass


class InsufficientDataError(NlprobeError, ValueError):
    pass


class FormatError(NlprobeError, OSError):
    """Malformed input file (bad header, payload length, non-uniform axis)."""


class BoundsNotCertifiedError(NlprobeError, ValueError):
    """Picard step length / ball radius violate the contraction conditions."""
