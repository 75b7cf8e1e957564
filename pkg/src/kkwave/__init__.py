"""Quasilinear wave system on R^{1+3} x S^1: solver and diagnostics."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BlowUpError,
    ConfigError,
    ConfigMismatchError,
    DomainError,
    EmptyBranchError,
    FitDegenerateError,
    HistoryGapError,
    HistoryTooShallowError,
    KKWaveError,
    MissingArtifactsError,
    NonFiniteError,
    NotCompactlySupportedError,
    NotKlainermanError,
    OrderTooHighError,
    RayLeavesDomainError,
    SandwichViolatedError,
    SizeError,
    UnknownCaseError,
    WindowTooShortError,
)
from .geometry import (  # noqa: F401
    Branch,
    HyperboloidSlice,
    MultiIndex,
    Point,
    Region,
    VectorFieldId,
    classify,
    exterior_weight,
    hyperboloid_slice,
    iter_words,
    split_radius,
)
