"""Geometry of the foliation: regions, hyperboloids, weights, vector-field words.

Coordinates are (t, r, y): t >= 2 Minkowski time, r >= 0 the spatial radius,
y the periodic coordinate on the circle. The interior region is r < t - 1,
the exterior r >= t - 1, split along the shifted cone t = r + 1. Interior
slices are truncated hyperboloids t = sqrt(s^2 + r^2); they meet the cone at
r_split = (s^2 - 1)/2.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EmptyBranchError

TWO_PI = 2.0 * math.pi


# ======================================================================
# points and regions
# ======================================================================


class Region(enum.Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"


@dataclass(frozen=True)
class Point:
    """A point (t, r, y) with t >= 2, r >= 0, y wrapped into [0, 2*pi)."""

    t: float
    r: float
    y: float = 0.0

    def __post_init__(self):
        if not (self.t >= 2.0):
            raise DomainError(f"need t >= 2, got t = {self.t}")
        if not (self.r >= 0.0):
            raise DomainError(f"need r >= 0, got r = {self.r}")
        object.__setattr__(self, "y", self.y % TWO_PI)

    @property
    def s(self):
        """Hyperboloidal radius sqrt(t^2 - r^2); only defined in the interior."""
        if self.r >= self.t:
            raise DomainError(f"s undefined at r = {self.r} >= t = {self.t}")
        return math.sqrt(self.t * self.t - self.r * self.r)


def classify(point):
    """Interior (r < t - 1) or exterior (r >= t - 1) of the shifted cone."""
    return Region.INTERIOR if point.r < point.t - 1.0 else Region.EXTERIOR


def split_radius(s):
    """Radius where the hyperboloid t = sqrt(s^2 + r^2) meets t = r + 1."""
    return 0.5 * (s * s - 1.0)


# ======================================================================
# truncated hyperboloid slices
# ======================================================================


class Branch(enum.Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"
    FULL = "full"


@dataclass
class HyperboloidSlice:
    """Quadrature nodes for a branch of the hyperboloid t = sqrt(s^2 + r^2).

    Nodes live on the uniform radial grid r_j = j*dr (so slice data can be
    pulled back from solver snapshots without interpolation). Weights are
    cell-split trapezoid weights including the 4*pi*r^2 area factor: node j
    carries |dual cell of j, intersected with the branch| * 4*pi*r_j^2. The
    node whose dual cell straddles r_split carries the two fractions of its
    weight in the two branches, which makes branch additivity exact; that one
    node can sit up to dr/2 on the wrong side of the split.
    """

    s: float
    branch: Branch
    dr: float
    j: np.ndarray  # grid indices of the nodes, int64
    r: np.ndarray  # node radii, r = j*dr
    t: np.ndarray  # node times, t = sqrt(s^2 + r^2)
    w: np.ndarray  # quadrature weights, >= 0, include 4*pi*r^2

    def integrate(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape != self.r.shape:
            raise DomainError(
                f"slice has {self.r.size} nodes, got {values.shape} values"
            )
        return float(self.w @ values)

    @property
    def n_nodes(self):
        return self.r.size


def _cell_bounds(n_nodes, dr, r_max):
    """Dual-cell endpoints [a_j, b_j] for nodes j = 0..n_nodes-1."""
    r = np.arange(n_nodes) * dr
    a = np.maximum(r - 0.5 * dr, 0.0)
    b = np.minimum(r + 0.5 * dr, r_max)
    return r, a, b


def hyperboloid_slice(s, branch, r_max, n_nodes):
    """Build quadrature for H_s = {t = sqrt(s^2 + r^2), 0 <= r <= r_max}.

    branch selects the interior part (r < r_split), the exterior part, or the
    full slice. Weights of the two proper branches add exactly to the full
    weights node by node. Raises EmptyBranchError if the requested branch
    carries no weight, DomainError on malformed arguments.
    """
    if isinstance(branch, str):
        branch = Branch(branch)
    if not (s >= 2.0):
        raise DomainError(f"slice apex t = s must be >= 2, got s = {s}")
    if n_nodes < 2:
        raise DomainError(f"need at least 2 nodes, got {n_nodes}")
    if not (r_max > 0.0):
        raise DomainError(f"need r_max > 0, got {r_max}")

    dr = r_max / (n_nodes - 1)
    r, a, b = _cell_bounds(n_nodes, dr, r_max)
    r_star = split_radius(s)

    if branch is Branch.INTERIOR:
        length = np.clip(np.minimum(b, r_star) - a, 0.0, None)
    elif branch is Branch.EXTERIOR:
        length = np.clip(b - np.maximum(a, r_star), 0.0, None)
    else:
        length = b - a

    w = 4.0 * math.pi * r * r * length
    keep = length > 0.0
    if not np.any(keep):
        raise EmptyBranchError(
            f"branch {branch.value} of H_{s} is empty on [0, {r_max}]"
        )
    jj = np.nonzero(keep)[0].astype(np.int64)
    rr = r[keep]
    tt = np.sqrt(s * s + rr * rr)
    return HyperboloidSlice(
        s=float(s), branch=branch, dr=dr, j=jj, r=rr, t=tt, w=w[keep]
    )


# ======================================================================
# exterior weight
# ======================================================================


def exterior_weight(r, t, alpha):
    """(2 + r - t)^alpha, defined on the exterior region r >= t - 1 only."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    q = 2.0 + r - t
    if np.any(q < 1.0 - 1e-12):
        bad = float(np.min(q))
        raise DomainError(
            f"exterior weight evaluated at r < t - 1 (min of 2+r-t was {bad})"
        )
    out = q ** alpha
    return float(out) if out.ndim == 0 else out


# ======================================================================
# vector-field identifiers and words
# ======================================================================


class VectorFieldId(enum.Enum):
    DT = "Dt"
    DR = "Dr"
    DY = "Dy"
    BOOST_R = "BoostR"  # t*Dr + r*Dt
    SCALING = "Scaling"  # t*Dt + r*Dr

    @property
    def is_word_letter(self):
        return self is not VectorFieldId.SCALING


WORD_ALPHABET = (
    VectorFieldId.DT,
    VectorFieldId.DR,
    VectorFieldId.DY,
    VectorFieldId.BOOST_R,
)


@dataclass(frozen=True)
class MultiIndex:
    """A word of commuting-family letters; order is the letter sequence."""

    word: tuple = field(default_factory=tuple)

    def __post_init__(self):
        for letter in self.word:
            if not isinstance(letter, VectorFieldId):
                raise DomainError(f"word letter {letter!r} is not a VectorFieldId")
            if not letter.is_word_letter:
                raise DomainError("Scaling cannot appear in a word")

    @property
    def n(self):
        return len(self.word)

    @property
    def k(self):
        return sum(1 for z in self.word if z is VectorFieldId.BOOST_R)

    def count(self, letter):
        return sum(1 for z in self.word if z is letter)

    @property
    def parity(self):
        """Sign of the word field at r = 0: (-1)^(#Dr + #BoostR)."""
        odd = self.count(VectorFieldId.DR) + self.count(VectorFieldId.BOOST_R)
        return -1.0 if odd % 2 else 1.0

    def label(self):
        return "".join(z.value for z in self.word) if self.word else "Id"


def iter_words(n_max, boost_max=None, alphabet=WORD_ALPHABET):
    """All words of length <= n_max (and <= boost_max boosts), short first."""
    for n in range(n_max + 1):
        for word in itertools.product(alphabet, repeat=n):
            mi = MultiIndex(word)
            if boost_max is not None and mi.k > boost_max:
                continue
            yield mi
