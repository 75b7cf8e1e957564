"""Exception types shared across the package.

Kept flat and descriptive: callers catch KKWaveError for anything domain
related, or the specific class when the distinction matters (the CLI maps
them onto exit codes).
"""


class KKWaveError(Exception):
    """Base class for all domain errors raised by this package."""


class DomainError(KKWaveError):
    """A point/parameter lies outside the region an operation is defined on."""


class EmptyBranchError(KKWaveError):
    """Requested hyperboloid branch has no nodes inside the radial window."""


class SizeError(KKWaveError):
    """Array/grid size below the minimum an operation needs."""


class HistoryTooShallowError(KKWaveError):
    """Ring buffer does not hold enough time levels for the requested stencil."""


class HistoryGapError(KKWaveError):
    """A requested time is not bracketed by buffered levels."""


class UnknownCaseError(KKWaveError):
    """Unregistered manufactured-solution id (or unknown quantity id)."""


class NotKlainermanError(KKWaveError):
    """Vector field passed to the commutator is not a rotation or boost."""


class NonFiniteError(KKWaveError):
    """NaN/Inf detected in evolved state or derived quantity."""


class BlowUpError(KKWaveError):
    """Monitored norm crossed the blow-up ceiling during evolution."""

    def __init__(self, t, norm, ceiling):
        super().__init__(f"blow-up at t={t:.6g}: norm {norm:.6g} > ceiling {ceiling:.6g}")
        self.t = t
        self.norm = norm
        self.ceiling = ceiling


class SandwichViolatedError(KKWaveError):
    """Quasilinear energy fell outside [0.9, 1.1] x base while max|u| <= 1/10."""


class OrderTooHighError(KKWaveError):
    """Requested vector-field word order exceeds the configured maximum."""


class WindowTooShortError(KKWaveError):
    """Decay-fit window does not satisfy t_hi/t_lo >= 4 or lies outside the run."""


class FitDegenerateError(KKWaveError):
    """All samples of the fitted quantity vanish (nothing to fit)."""


class RayLeavesDomainError(KKWaveError):
    """The scaled ray of the pointwise diagnostic exits the buffered history."""


class ConfigError(KKWaveError):
    """Malformed configuration file or inconsistent parameter set."""


class ConfigMismatchError(KKWaveError):
    """Paired runs differ in fields other than the ablation flag."""


class NotCompactlySupportedError(KKWaveError):
    """Trial field fails the compact-support precondition of the Hardy check."""


class MissingArtifactsError(KKWaveError):
    """Run directory lacks the files a post-processing command needs."""


class ConfigParseError(KKWaveError):
    """Config file text could not be parsed; the message names the line."""


class UnknownQuantityError(DomainError):
    """Requested decay quantity id is not one of the published ids."""
