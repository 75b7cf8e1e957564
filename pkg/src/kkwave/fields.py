"""Mode towers on the radial grid, transforms, differencing, word application.

The unknown W(t,r,y) is stored through its Fourier modes in y: W_k(t,r) for
k = 0..K with the reality convention W_{-k} = conj(W_k). The normalization is
W_k = (1/2pi) int e^{-iky} W dy, so reconstruction is the plain sum
W = sum_{|k|<=K} W_k e^{iky} and the discrete transform is rfft/M.

A StateHistory is a ring of uniformly spaced (t, W, dW) levels; it supports
cubic (4-level) Lagrange interpolation in t and lazily memoized derivative
tables per level, which is what the hyperboloid diagnostics consume. Words of
vector fields {Dt, Dr, Dy, BoostR} are applied by expanding the word into
polynomial-coefficient derivative monomials once, then evaluating against the
tables; second time derivatives come from an injected equation callback, never
from differencing the ring twice.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from ._poly import Poly
from .errors import (
    DomainError,
    HistoryGapError,
    HistoryTooShallowError,
    OrderTooHighError,
    SizeError,
    UnknownCaseError,
)
from .geometry import MultiIndex, VectorFieldId

# ======================================================================
# spectral transforms on the circle
# ======================================================================


def y_grid(M):
    return 2.0 * math.pi * np.arange(M) / M


def oversample_size(K):
    """y-grid size for alias-free quadratic products of band-K fields."""
    return 2 * (2 * K + 1)


def decompose(samples, K):
    """Fourier modes k = 0..K of real samples on the uniform y-grid.

    samples has the y axis last; needs M >= 2K+1 so that band-limited data
    of degree <= K is represented exactly.
    """
    samples = np.asarray(samples, dtype=float)
    M = samples.shape[-1]
    if M < 2 * K + 1:
        raise SizeError(f"need M >= 2K+1 = {2 * K + 1} samples, got {M}")
    return np.fft.rfft(samples, axis=-1)[..., : K + 1] / M


def to_samples(modes, M):
    """Inverse of decompose: real samples on M uniform y-points."""
    modes = np.asarray(modes)
    K = modes.shape[-1] - 1
    if M < 2 * K + 1:
        raise SizeError(f"need M >= 2K+1 = {2 * K + 1} samples, got {M}")
    buf = np.zeros(modes.shape[:-1] + (M // 2 + 1,), dtype=complex)
    buf[..., : K + 1] = modes * M
    return np.fft.irfft(buf, n=M, axis=-1)


def reconstruct(modes, y):
    """Pointwise sum_{|k|<=K} W_k e^{iky} for real fields (modes k >= 0)."""
    modes = np.asarray(modes)
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    K = modes.shape[-1] - 1
    out = np.multiply.outer(np.real(modes[..., 0]), np.ones_like(y_arr))
    for k in range(1, K + 1):
        out = out + 2.0 * np.real(
            np.multiply.outer(modes[..., k], np.exp(1j * k * y_arr))
        )
    if np.ndim(y) == 0:
        out = out[..., 0]
    return float(out) if out.ndim == 0 else out


def l2y_norm_sq(modes):
    """int_{S1} |f|^2 dy = 2pi(|f_0|^2 + 2 sum_{k>=1} |f_k|^2), mode axis last."""
    modes = np.asarray(modes)
    out = np.abs(modes[..., 0]) ** 2 + 2.0 * np.sum(
        np.abs(modes[..., 1:]) ** 2, axis=-1
    )
    return 2.0 * math.pi * out


# ======================================================================
# mode field container
# ======================================================================


@dataclass
class ModeField:
    """One scalar field's mode tower W_k(r_j), k = 0..K, on r_j = j*dr."""

    K: int
    dr: float
    t: float
    data: np.ndarray  # complex, shape (K+1, J+1)
    is_real: bool = True

    def __post_init__(self):
        if self.K < 0 or self.data.shape[0] != self.K + 1:
            raise DomainError(
                f"mode axis mismatch: K={self.K}, data rows {self.data.shape[0]}"
            )

    @property
    def J(self):
        return self.data.shape[1] - 1

    @property
    def r(self):
        return np.arange(self.J + 1) * self.dr

    def zero_mode(self):
        return np.real(self.data[0])

    def sample(self, j, y):
        return reconstruct(self.data[:, j], y)


# ======================================================================
# radial differencing
# ======================================================================


def radial_derivative_array(g, dr, order=1, parity=1.0):
    """2nd-order radial stencils on the last axis of g.

    Ghost value at the origin is the parity extension g_{-1} = parity*g_1
    (even fields have parity +1); the outer edge j=J uses one-sided stencils.
    """
    g = np.asarray(g)
    J = g.shape[-1] - 1
    if J < 4:
        raise SizeError(f"need J >= 4 radial intervals, got J = {J}")
    out = np.empty_like(g)
    if order == 1:
        out[..., 1:-1] = (g[..., 2:] - g[..., :-2]) / (2.0 * dr)
        out[..., 0] = (1.0 - parity) * g[..., 1] / (2.0 * dr)
        out[..., -1] = (3.0 * g[..., -1] - 4.0 * g[..., -2] + g[..., -3]) / (2.0 * dr)
    elif order == 2:
        dr2 = dr * dr
        out[..., 1:-1] = (g[..., 2:] - 2.0 * g[..., 1:-1] + g[..., :-2]) / dr2
        out[..., 0] = ((1.0 + parity) * g[..., 1] - 2.0 * g[..., 0]) / dr2
        out[..., -1] = (
            2.0 * g[..., -1] - 5.0 * g[..., -2] + 4.0 * g[..., -3] - g[..., -4]
        ) / dr2
    else:
        raise DomainError(f"order must be 1 or 2, got {order}")
    return out


def radial_derivative(mode_field, order=1, parity=1.0):
    out = radial_derivative_array(mode_field.data, mode_field.dr, order, parity)
    return ModeField(
        K=mode_field.K, dr=mode_field.dr, t=mode_field.t, data=out,
        is_real=mode_field.is_real,
    )


# ======================================================================
# Lagrange interpolation in t (4 points)
# ======================================================================


def lagrange_coeffs(ts, t):
    ts = np.asarray(ts, dtype=float)
    n = ts.size
    out = np.empty(n)
    for i in range(n):
        num = 1.0
        for j in range(n):
            if j != i:
                num *= (t - ts[j]) / (ts[i] - ts[j])
        out[i] = num
    return out


def lagrange_deriv_coeffs(ts, t):
    ts = np.asarray(ts, dtype=float)
    n = ts.size
    out = np.zeros(n)
    for i in range(n):
        denom = 1.0
        for j in range(n):
            if j != i:
                denom *= ts[i] - ts[j]
        total = 0.0
        for m in range(n):
            if m == i:
                continue
            prod = 1.0
            for j in range(n):
                if j != i and j != m:
                    prod *= t - ts[j]
            total += prod
        out[i] = total / denom
    return out


# ======================================================================
# state history ring
# ======================================================================


class _Level:
    __slots__ = ("t", "W", "dW", "tables")

    def __init__(self, t, W, dW):
        self.t = t
        self.W = W
        self.dW = dW
        self.tables = {}


class StateHistory:
    """Uniformly spaced (t, W, dW) levels with lazy derivative tables.

    W and dW are complex arrays of shape (2, K+1, J+1): component axis first
    (0 = u, 1 = v). `second_deriv` is an optional callback (W, dW, t) ->
    d_t^2 W of the same shape, used for the (2,0) table; the solver installs
    its own right side here so second time derivatives never come from
    differencing the ring twice.
    """

    TABLE_BUDGET = 384  # max cached derivative arrays across all levels

    def __init__(self, K, J, dr, depth=None, second_deriv=None):
        self.K = K
        self.J = J
        self.dr = dr
        self.depth = depth
        self.second_deriv = second_deriv
        self.levels = []
        self._lru = OrderedDict()

    def __len__(self):
        return len(self.levels)

    # -- mutation ------------------------------------------------------
    def push(self, t, W, dW):
        if W.shape != (2, self.K + 1, self.J + 1) or dW.shape != W.shape:
            raise DomainError(f"level shape {W.shape} does not match history grid")
        if self.levels:
            dt_new = t - self.levels[-1].t
            if dt_new <= 0:
                raise HistoryGapError(f"non-increasing level time {t}")
            if len(self.levels) >= 2:
                dt0 = self.levels[1].t - self.levels[0].t
                if abs(dt_new - dt0) > 1e-9 * max(1.0, abs(dt0)):
                    raise HistoryGapError(
                        f"non-uniform spacing: {dt_new} vs {dt0}"
                    )
        self.levels.append(_Level(t, W, dW))
        if self.depth is not None and len(self.levels) > self.depth:
            dropped = self.levels.pop(0)
            for key in list(self._lru):
                if key[0] is dropped:
                    del self._lru[key]

    @property
    def dt(self):
        if len(self.levels) < 2:
            raise HistoryTooShallowError("need >= 2 levels for dt")
        return self.levels[1].t - self.levels[0].t

    @property
    def t_first(self):
        return self.levels[0].t

    @property
    def t_last(self):
        return self.levels[-1].t

    # -- interpolation windows ------------------------------------------
    def window(self, t):
        """Indices of the 4 levels used to interpolate at time t."""
        if len(self.levels) < 4:
            raise HistoryTooShallowError(
                f"need >= 4 levels, have {len(self.levels)}"
            )
        slack = 1e-9 * max(1.0, abs(self.dt))
        if t < self.t_first - slack or t > self.t_last + slack:
            raise HistoryGapError(
                f"t = {t} outside buffered range [{self.t_first}, {self.t_last}]"
            )
        # center the window on the bracketing interval, clamped at the edges
        i = int(math.floor((t - self.t_first) / self.dt))
        i0 = min(max(i - 1, 0), len(self.levels) - 4)
        return i0

    # -- derivative tables ----------------------------------------------
    def table(self, level, key):
        """Lazily built derivative array for a level; key = (a_t, a_r)."""
        if key in level.tables:
            self._lru.move_to_end((level, key), last=True)
            return level.tables[key]
        a_t, a_r = key
        if a_t == 0 and a_r == 0:
            return level.W
        if a_t == 1 and a_r == 0:
            return level.dW
        if a_t == 0 and a_r == 1:
            arr = radial_derivative_array(level.W, self.dr, order=1)
        elif a_t == 0 and a_r == 2:
            arr = radial_derivative_array(level.W, self.dr, order=2)
        elif a_t == 1 and a_r == 1:
            arr = radial_derivative_array(level.dW, self.dr, order=1)
        elif a_t == 2 and a_r == 0:
            if self.second_deriv is None:
                raise DomainError(
                    "second time derivatives need the equation callback "
                    "(history.second_deriv is not set)"
                )
            arr = self.second_deriv(level.W, level.dW, level.t)
        else:
            raise OrderTooHighError(f"no derivative table for order {key}")
        level.tables[key] = arr
        self._lru[(level, key)] = None
        if len(self._lru) > self.TABLE_BUDGET:
            (old_level, old_key), _ = self._lru.popitem(last=False)
            old_level.tables.pop(old_key, None)
        return arr

    def interp_table(self, key, t, deriv=False):
        """Interpolate a derivative table at time t (cubic Lagrange).

        With deriv=True returns the d/dt of the interpolant instead, which
        adds one order of t-differentiation at O(dt^3) accuracy.
        """
        i0 = self.window(t)
        quad = self.levels[i0 : i0 + 4]
        ts = np.array([lv.t for lv in quad])
        coeffs = (
            lagrange_deriv_coeffs(ts, t) if deriv else lagrange_coeffs(ts, t)
        )
        out = coeffs[0] * self.table(quad[0], key)
        for c, lv in zip(coeffs[1:], quad[1:]):
            out = out + c * self.table(lv, key)
        return out

    def interp_column(self, key, t, j, deriv=False):
        """Like interp_table but only radial column j — the cheap per-node
        path the hyperboloid pullbacks use (shape (2, K+1))."""
        i0 = self.window(t)
        quad = self.levels[i0 : i0 + 4]
        ts = np.array([lv.t for lv in quad])
        coeffs = (
            lagrange_deriv_coeffs(ts, t) if deriv else lagrange_coeffs(ts, t)
        )
        out = coeffs[0] * self.table(quad[0], key)[..., j]
        for c, lv in zip(coeffs[1:], quad[1:]):
            out = out + c * self.table(lv, key)[..., j]
        return out


# ======================================================================
# vector-field words: symbolic expansion + table evaluation
# ======================================================================

_T = Poly.var(0, 2)  # polynomial t over (t, r)
_R = Poly.var(1, 2)
_ONE = Poly.const(1.0, 2)

# first-order letters as  sum_e a_e(t,r) * d_e  with e in {t, r, y}
_LETTERS = {
    VectorFieldId.DT: ((_ONE, (1, 0, 0)),),
    VectorFieldId.DR: ((_ONE, (0, 1, 0)),),
    VectorFieldId.DY: ((_ONE, (0, 0, 1)),),
    VectorFieldId.BOOST_R: ((_R, (1, 0, 0)), (_T, (0, 1, 0))),
    VectorFieldId.SCALING: ((_T, (1, 0, 0)), (_R, (0, 1, 0))),
}


def _op_identity():
    return {(0, 0, 0): _ONE}


def _op_apply_letter(letter, op):
    """Expansion of letter∘op as {(a_t, a_r, a_y): Poly(t, r)}."""
    out = {}

    def add(key, poly):
        cur = out.get(key)
        acc = poly if cur is None else cur + poly
        if acc.is_zero:
            out.pop(key, None)
        else:
            out[key] = acc

    for coeff, (e_t, e_r, e_y) in _LETTERS[letter]:
        for (a_t, a_r, a_y), c in op.items():
            if e_y:
                add((a_t, a_r, a_y + 1), coeff * c)
                continue
            # product rule: coeff * d_e (c * f^(a)) = coeff*(d_e c)*f^(a)
            #                                        + coeff*c*f^(a+e)
            dc = c.diff(0) if e_t else c.diff(1)
            if not dc.is_zero:
                add((a_t, a_r, a_y), coeff * dc)
            add((a_t + e_t, a_r + e_r, a_y), coeff * c)
    return out


def word_expansion(word):
    """Expand a word (leftmost letter outermost) into derivative monomials."""
    op = _op_identity()
    for letter in reversed(word):
        op = _op_apply_letter(letter, op)
    return op


def _mode_phase(K, a_y):
    """(ik)^{a_y} for k = 0..K, shaped (K+1, 1) for broadcasting over r."""
    k = np.arange(K + 1)
    return ((1j * k) ** a_y)[:, None]


def evaluate_expansion(history, op, t, deriv_t=False):
    """Evaluate an expansion at time t on the full radial grid.

    Returns an array (2, K+1, J+1). With deriv_t=True this evaluates d_t of
    the word field: each table is interpolated with the Lagrange
    time-derivative weights (one extra order, O(dt^3) accurate) and the
    t-dependence of the coefficient polynomials is differentiated too.
    """
    r_full = np.arange(history.J + 1) * history.dr
    out = None
    for (a_t, a_r, a_y), cpoly in op.items():
        if a_t > 2 or a_t + a_r > 2:
            raise OrderTooHighError(
                f"word expansion needs derivative order ({a_t},{a_r}); "
                "only total order <= 2 with a_t <= 2 is supported"
            )
        table = history.interp_table((a_t, a_r), t, deriv=deriv_t)
        coeff = cpoly.eval((t, r_full))  # Poly.eval broadcasts over the grid
        term = table * coeff * _mode_phase(history.K, a_y)
        if deriv_t:
            dcpoly = cpoly.diff(0)
            if not dcpoly.is_zero:
                term = term + (
                    history.interp_table((a_t, a_r), t)
                    * dcpoly.eval((t, r_full))
                    * _mode_phase(history.K, a_y)
                )
        out = term if out is None else out + term
    if out is None:
        out = np.zeros((2, history.K + 1, history.J + 1), dtype=complex)
    return out


def apply_word(history, word, t):
    """Word field Z^w W at time t on the grid; word is a MultiIndex or tuple."""
    letters = word.word if isinstance(word, MultiIndex) else tuple(word)
    return evaluate_expansion(history, word_expansion(letters), t)


# keys whose time derivative is itself a stored table; everything else falls
# back to differentiating the time interpolant (O(dt^3))
_T_SHIFT = {(0, 0): (1, 0), (1, 0): (2, 0), (0, 1): (1, 1)}


def _expansion_columns(history, op, t, jj):
    """Word-field values at (t, r_j) for an index array jj; (2, K+1, len(jj))."""
    r = np.asarray(jj, dtype=float) * history.dr
    phase_k = np.arange(history.K + 1)[:, None]
    out = np.zeros((2, history.K + 1, len(jj)), dtype=complex)
    for (a_t, a_r, a_y), cpoly in op.items():
        col = history.interp_column((a_t, a_r), t, np.asarray(jj))
        out += col * cpoly.eval((t, r)) * (1j * phase_k) ** a_y
    return out


def expansion_node(history, op, t, j, parity=1.0):
    """(X, X_t, X_r) of a word field at the node (t, r_j); columns (2, K+1).

    X_t prefers exact table shifts (e.g. the stored dW for the plain field)
    and falls back to the derivative of the time interpolant; X_r is the
    centered difference of the neighbor columns, with the parity ghost
    X(-dr) = parity * X(dr) at the origin and a one-sided stencil at the
    outer edge.
    """
    J = history.J
    if not 0 <= j <= J:
        raise DomainError(f"node index {j} outside radial grid 0..{J}")
    r = j * history.dr
    phase_k = np.arange(history.K + 1)[:, None]

    x_t = np.zeros((2, history.K + 1), dtype=complex)
    for (a_t, a_r, a_y), cpoly in op.items():
        phase = (1j * phase_k[:, 0]) ** a_y
        shifted = _T_SHIFT.get((a_t, a_r))
        if shifted is not None:
            dcol = history.interp_column(shifted, t, j)
        else:
            dcol = history.interp_column((a_t, a_r), t, j, deriv=True)
        x_t += dcol * cpoly.eval((t, r)) * phase
        dcpoly = cpoly.diff(0)
        if not dcpoly.is_zero:
            x_t += (
                history.interp_column((a_t, a_r), t, j)
                * dcpoly.eval((t, r))
                * phase
            )

    if j == 0:
        cols = _expansion_columns(history, op, t, (0, 1))
        x = cols[..., 0]
        x_r = (cols[..., 1] - parity * cols[..., 1]) / (2.0 * history.dr)
    elif j == J:
        cols = _expansion_columns(history, op, t, (J - 2, J - 1, J))
        x = cols[..., 2]
        x_r = (3.0 * cols[..., 2] - 4.0 * cols[..., 1] + cols[..., 0]) / (
            2.0 * history.dr
        )
    else:
        cols = _expansion_columns(history, op, t, (j - 1, j, j + 1))
        x = cols[..., 1]
        x_r = (cols[..., 2] - cols[..., 0]) / (2.0 * history.dr)
    return x, x_t, x_r


def apply_vector_field(history, Z, at_level):
    """Single vector field applied at a buffered level (index into the ring).

    Dt returns the stored time derivative exactly; Scaling is allowed here
    (it is only banned inside commutator words).
    """
    n = len(history.levels)
    if n < 4:
        raise HistoryTooShallowError(f"need >= 4 levels, have {n}")
    if not (0 <= at_level < n):
        raise DomainError(f"level index {at_level} out of range 0..{n - 1}")
    level = history.levels[at_level]
    if Z is VectorFieldId.DT:
        return level.dW.copy()
    return evaluate_expansion(history, word_expansion((Z,)), level.t)


def apply_tangential(history, at_level):
    """T = d_r + d_t, the derivative tangent to outgoing cones."""
    level = history.levels[at_level]
    return level.dW + history.table(level, (0, 1))


def apply_rescaled_boost(history, at_level):
    """dbar = t^{-1} BoostR = d_r + (r/t) d_t."""
    level = history.levels[at_level]
    r = np.arange(history.J + 1) * history.dr
    return history.table(level, (0, 1)) + (r / level.t) * level.dW


# ======================================================================
# scalar radial histories (for the null-form representation checks)
# ======================================================================


@dataclass
class ScalarRadialHistory:
    """History of one real radial scalar F(t, r) on the uniform grid."""

    t0: float
    dt: float
    dr: float
    values: np.ndarray  # (L, J+1) float
    parity: float = 1.0

    @classmethod
    def from_function(cls, fn, t0, dt, n_levels, dr, J, parity=1.0):
        r = np.arange(J + 1) * dr
        rows = [np.asarray(fn(t0 + m * dt, r), dtype=float) for m in range(n_levels)]
        return cls(t0=t0, dt=dt, dr=dr, values=np.stack(rows), parity=parity)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.values.shape[0])

    def _window(self, t):
        L = self.values.shape[0]
        if L < 4:
            raise HistoryTooShallowError(f"need >= 4 levels, have {L}")
        t_last = self.t0 + (L - 1) * self.dt
        slack = 1e-9 * max(1.0, self.dt)
        if t < self.t0 - slack or t > t_last + slack:
            raise HistoryGapError(
                f"t = {t} outside buffered range [{self.t0}, {t_last}]"
            )
        i = int(math.floor((t - self.t0) / self.dt))
        return min(max(i - 1, 0), L - 4)

    def profiles(self, t):
        """(F, Ft, Fr) profiles at time t: cubic in t, stencils in r."""
        i0 = self._window(t)
        ts = self.times[i0 : i0 + 4]
        block = self.values[i0 : i0 + 4]
        F = lagrange_coeffs(ts, t) @ block.reshape(4, -1)
        Ft = lagrange_deriv_coeffs(ts, t) @ block.reshape(4, -1)
        F = F.reshape(self.values.shape[1:])
        Ft = Ft.reshape(self.values.shape[1:])
        Fr = radial_derivative_array(F, self.dr, order=1, parity=self.parity)
        return F, Ft, Fr

    def at_point(self, t, r):
        """(F, Ft, Fr) at one point; r is radially interpolated (cubic)."""
        F, Ft, Fr = self.profiles(t)
        J = F.shape[-1] - 1
        x = r / self.dr
        j = int(math.floor(x))
        j0 = min(max(j - 1, 0), J - 3)
        rs = (np.arange(j0, j0 + 4)) * self.dr
        c = lagrange_coeffs(rs, r)
        return (
            float(c @ F[j0 : j0 + 4]),
            float(c @ Ft[j0 : j0 + 4]),
            float(c @ Fr[j0 : j0 + 4]),
        )


# ======================================================================
# manufactured solutions
# ======================================================================


def _gauss(z):
    return np.exp(-np.asarray(z, dtype=float) ** 2)


def _dgauss(z):
    z = np.asarray(z, dtype=float)
    return -2.0 * z * np.exp(-(z ** 2))


def _d2gauss(z):
    z = np.asarray(z, dtype=float)
    return (4.0 * z * z - 2.0) * np.exp(-(z ** 2))


@dataclass
class ManufacturedCase:
    """A named analytic solution with the forcing that makes it exact.

    fields(t, r, K) returns mode arrays (2, K+1, len(r)) for W, d_tW and the
    forcing G, where G is the target operator applied to the analytic W.
    The operator flags say which solver switches the case was built for.
    """

    id: str
    K_min: int
    nonlinearity_on: bool
    quasilinear_on: bool
    support_radius: float
    null_matrix_1: np.ndarray | None = None
    null_matrix_2: np.ndarray | None = None
    _fields_fn: object = field(default=None, repr=False)

    def fields(self, t, r, K):
        if K < self.K_min:
            raise SizeError(f"case {self.id} needs K >= {self.K_min}, got {K}")
        return self._fields_fn(t, np.asarray(r, dtype=float), K)


def _case_wave_pulse():
    # W_0 = (f(t-r) - f(t+r))/r with f a Gaussian: exact solution of the
    # radial 3D wave equation; limit at r=0 is -2f'(t).
    def fields(t, r, K):
        shape = (2, K + 1, r.size)
        W = np.zeros(shape, dtype=complex)
        dW = np.zeros(shape, dtype=complex)
        G = np.zeros(shape, dtype=complex)
        safe = r.copy()
        origin = safe == 0.0
        safe[origin] = 1.0
        w0 = (_gauss(t - safe) - _gauss(t + safe)) / safe
        w0t = (_dgauss(t - safe) - _dgauss(t + safe)) / safe
        w0[origin] = -2.0 * _dgauss(t)
        w0t[origin] = -2.0 * _d2gauss(t)
        W[0, 0] = w0
        dW[0, 0] = w0t
        return W, dW, G

    return ManufacturedCase(
        id="wave_pulse", K_min=0, nonlinearity_on=False, quasilinear_on=False,
        support_radius=8.1, _fields_fn=fields,
    )


def _case_kg_tower():
    # spatially constant modes W_k(t) = cos(kt): exact solutions of the
    # linear Klein-Gordon mode ODEs, k >= 1, with a constant zero mode.
    def fields(t, r, K):
        shape = (2, K + 1, r.size)
        W = np.zeros(shape, dtype=complex)
        dW = np.zeros(shape, dtype=complex)
        G = np.zeros(shape, dtype=complex)
        ones = np.ones_like(r)
        for k in range(1, K + 1):
            W[0, k] = math.cos(k * t) * ones
            dW[0, k] = -k * math.sin(k * t) * ones
            W[1, k] = 0.5 * math.cos(k * t) * ones
            dW[1, k] = -0.5 * k * math.sin(k * t) * ones
        return W, dW, G

    return ManufacturedCase(
        id="kg_tower", K_min=1, nonlinearity_on=False, quasilinear_on=False,
        support_radius=math.inf, _fields_fn=fields,
    )


_CASE_C_EPS = 0.5
_CASE_C_A1 = np.array([[1.0, 0.5], [0.5, 1.0]])
_CASE_C_A2 = np.array([[0.5, 1.0], [1.0, 0.5]])
_case_c_lambdas = None


def _case_c_build():
    """Symbolically derive the forcing for the full quasilinear operator.

    The analytic solution is a smooth space-time bump with one cos y / sin y
    harmonic; the forcing is G = Box W + u d_y^2 W - N(W, W) per component,
    with Box = -d_t^2 + d_r^2 + (2/r) d_r + d_y^2 and N_c = sum A^c_ij
    Q0(W_i, W_j), Q0 = d_t phi d_t psi - d_r phi d_r psi on radial fields.
    Everything is differentiated with sympy and lambdified once per process.
    """
    global _case_c_lambdas
    if _case_c_lambdas is not None:
        return _case_c_lambdas
    import sympy as sp

    t, r, y = sp.symbols("t r y", positive=False)
    eps = sp.Float(_CASE_C_EPS)
    p0 = sp.exp(-(r ** 2) / 4) * sp.exp(-((t - 3) ** 2) / 2)
    p1 = (t / 3) * sp.exp(-(r ** 2) / 4) * sp.exp(-((t - sp.Rational(7, 2)) ** 2) / 2)
    q1 = sp.exp(-(r ** 2) / 4) * sp.exp(-((t - 3) ** 2) / 3)
    u = eps * (p0 + p1 * sp.cos(y))
    v = eps * q1 * sp.sin(y)
    comps = [u, v]

    def box(f):
        return (
            -sp.diff(f, t, 2)
            + sp.diff(f, r, 2)
            + 2 * sp.diff(f, r) / r
            + sp.diff(f, y, 2)
        )

    def q0(f, g):
        return sp.diff(f, t) * sp.diff(g, t) - sp.diff(f, r) * sp.diff(g, r)

    G = []
    for c, A in enumerate((_CASE_C_A1, _CASE_C_A2)):
        N_c = sum(
            sp.Float(A[i][j]) * q0(comps[i], comps[j])
            for i in range(2)
            for j in range(2)
        )
        G.append(sp.expand(box(comps[c]) + u * sp.diff(comps[c], y, 2) - N_c))

    mods = ["numpy"]
    _case_c_lambdas = {
        "u": sp.lambdify((t, r, y), u, mods),
        "v": sp.lambdify((t, r, y), v, mods),
        "ut": sp.lambdify((t, r, y), sp.diff(u, t), mods),
        "vt": sp.lambdify((t, r, y), sp.diff(v, t), mods),
        "G0": sp.lambdify((t, r, y), G[0], mods),
        "G1": sp.lambdify((t, r, y), G[1], mods),
    }
    return _case_c_lambdas


def _case_quasi_bump():
    def fields(t, r, K):
        lam = _case_c_build()
        # 1/r terms in the symbolic Laplacian: nudge the origin node off zero
        # (the integrand is analytic there, error O(r^2) ~ 1e-14)
        r_safe = np.where(r == 0.0, 1e-7, r)
        M = oversample_size(max(K, 2))
        yv = y_grid(M)
        rr = r_safe[:, None]
        yy = yv[None, :]
        tt = float(t)
        W = np.zeros((2, K + 1, r.size), dtype=complex)
        dW = np.zeros_like(W)
        G = np.zeros_like(W)
        for c, (f, ft, g) in enumerate(
            (("u", "ut", "G0"), ("v", "vt", "G1"))
        ):
            vals = np.broadcast_to(lam[f](tt, rr, yy), (r.size, M))
            dvals = np.broadcast_to(lam[ft](tt, rr, yy), (r.size, M))
            gvals = np.broadcast_to(lam[g](tt, rr, yy), (r.size, M))
            W[c] = decompose(vals, K).T
            dW[c] = decompose(dvals, K).T
            G[c] = decompose(gvals, K).T
        return W, dW, G

    return ManufacturedCase(
        id="quasi_bump", K_min=2, nonlinearity_on=True, quasilinear_on=True,
        support_radius=12.0, null_matrix_1=_CASE_C_A1, null_matrix_2=_CASE_C_A2,
        _fields_fn=fields,
    )


_CASES = {
    "wave_pulse": _case_wave_pulse,
    "kg_tower": _case_kg_tower,
    "quasi_bump": _case_quasi_bump,
}


def manufactured(case_id):
    if case_id not in _CASES:
        raise UnknownCaseError(
            f"unknown case {case_id!r}; available: {sorted(_CASES)}"
        )
    return _CASES[case_id]()


# ======================================================================
# binary snapshot format
# ======================================================================

SNAPSHOT_MAGIC = b"KKWSNAP1"


def write_snapshot(path, W, dW, K, dr, t):
    """header: magic, K, J (int64 LE), dr, t (float64 LE); then the W and dW
    mode arrays for both components, real parts then imaginary parts, row
    order (component, k, j), contiguous little-endian float64."""
    J = W.shape[-1] - 1
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        np.array([K, J], dtype="<i8").tofile(fh)
        np.array([dr, t], dtype="<f8").tofile(fh)
        for arr in (W, dW):
            np.ascontiguousarray(arr.real, dtype="<f8").tofile(fh)
            np.ascontiguousarray(arr.imag, dtype="<f8").tofile(fh)


def read_snapshot(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise DomainError(f"{path}: not a snapshot file")
        K, J = np.fromfile(fh, dtype="<i8", count=2)
        dr, t = np.fromfile(fh, dtype="<f8", count=2)
        n = 2 * (int(K) + 1) * (int(J) + 1)
        out = []
        for _ in range(2):
            re = np.fromfile(fh, dtype="<f8", count=n)
            im = np.fromfile(fh, dtype="<f8", count=n)
            arr = (re + 1j * im).reshape(2, int(K) + 1, int(J) + 1)
            out.append(arr)
    return out[0], out[1], int(K), float(dr), float(t)
