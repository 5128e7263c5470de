"""Exception types shared across the package."""


class FrameLabError(Exception):
    """Base class for all framelab errors."""


class ConfigurationError(FrameLabError):
    """A configuration value is out of range or names an unknown kind."""


class EmptyDomainError(FrameLabError):
    """The grid spacing is too coarse: no node falls strictly inside the shape."""


class ContractViolation(FrameLabError):
    """A caller broke a documented precondition (shape mismatch, bad range)."""


class AssemblyError(FrameLabError):
    """Operator assembly failed (e.g. a coefficient sampled non-positive)."""


class SolverError(FrameLabError):
    """Eigen or reconstruction iteration failed its convergence contract."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class UnresolvedBandError(FrameLabError):
    """A spectral band beyond the reliable / computed part of the spectrum."""


class CalibrationError(FrameLabError):
    """Spacing-constant calibration could not certify the requested bound."""


class CacheMismatchError(FrameLabError):
    """An eigenbasis cache file does not match the requesting operator."""


class SuiteViolation(FrameLabError):
    """An inequality of the verification suite failed beyond tolerance."""
