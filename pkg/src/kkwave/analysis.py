"""Decay-rate fits, inequality checkers, ray diagnostic, null ablation.

This module turns run artifacts and analytic trial fields into verdicts:

* `fit_decay` extracts power-law exponents of interior sup-norms from
  snapshot series (log-log least squares over a window);
* `check_weighted_sobolev` / `check_hardy` evaluate the two weighted
  exterior-slice inequalities on analytic trial fields, with constants
  calibrated once on a frozen reference family and stored in
  `_calibration.py`;
* `check_klainerman_sobolev` evaluates the hyperboloid Sobolev inequality
  |W(t,x)|^2 <= C t^{-3} sum_{|g|<=2} int_{B(x,t/3)} |Z^g W|^2 on the zero
  modes of a buffered run, with the boost words reduced radially:
  sum_{|g|<=2} |Z^g F|^2 = |F|^2 + (1 + 2(t/r)^2)|BF|^2 + |B^2 F|^2
  for B = r d_t + t d_r;
* `ray_diagnostic` samples the rescaled-mode quantities Y, A, B along a
  hyperbolic ray and emits the Gronwall bound they must satisfy;
* `ablation_compare` pairs a null-form run against its NullOff twin.

Trial-field derivatives are symbolic (exact); only quadratures and sups are
discrete, on grids fixed by the frozen calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
import sympy as sp

from .errors import (
    ConfigMismatchError,
    DomainError,
    HistoryGapError,
    NotCompactlySupportedError,
    RayLeavesDomainError,
    UnknownQuantityError,
    WindowTooShortError,
)
from .fields import (
    StateHistory,
    decompose,
    expansion_node,
    oversample_size,
    radial_derivative_array,
    to_samples,
    word_expansion,
)
from .geometry import Branch, VectorFieldId, hyperboloid_slice, iter_words
from .energies import energy_interior, mode_multiplicity

__all__ = [
    "DecayFit",
    "InequalityCheck",
    "RayReport",
    "AblationReport",
    "TrialField",
    "QUANTITY_IDS",
    "fit_decay",
    "trial_family",
    "check_weighted_sobolev",
    "check_hardy",
    "check_klainerman_sobolev",
    "calibrate_constants",
    "ray_diagnostic",
    "ablation_compare",
]


# ======================================================================
# decay fits
# ======================================================================

QUANTITY_IDS = ("grad-w0", "l2y-tilde", "l2y-dy-tilde", "boost-w0")


@dataclass
class DecayFit:
    """Least-squares power law sup(t) ~ amplitude * t**exponent."""

    quantity: str
    t_lo: float
    t_hi: float
    exponent: float
    amplitude: float
    residual: float  # rms of the log-log fit residuals
    n_samples: int
    degenerate: bool = False


def _interior_sup(t, W, dW, dr, quantity):
    """Max over grid nodes with r < t - 1 of the requested pointwise
    quantity; zero-mode derivatives use the same stencils as the solver."""
    J = W.shape[2] - 1
    r = np.arange(J + 1) * dr
    mask = r < t - 1.0
    if not np.any(mask):
        return 0.0
    if quantity == "grad-w0":
        w0r = radial_derivative_array(W, dr)[:, 0, :]
        dens = np.sum(dW[:, 0, :].real ** 2 + dW[:, 0, :].imag ** 2
                      + w0r.real ** 2 + w0r.imag ** 2, axis=0)
        comp = (1.0 + (t - r) ** 2) ** 0.25  # <t-r>^(1/2) compensation
        return float(np.max(np.sqrt(dens[mask]) * comp[mask]))
    if quantity == "boost-w0":
        w0r = radial_derivative_array(W, dr)[:, 0, :]
        boost = t * w0r + r * dW[:, 0, :]
        dens = np.sum(boost.real ** 2 + boost.imag ** 2, axis=0)
        return float(np.max(np.sqrt(dens[mask])))
    if quantity in ("l2y-tilde", "l2y-dy-tilde"):
        K = W.shape[1] - 1
        kw = np.arange(K + 1) ** 2 if quantity == "l2y-dy-tilde" else np.ones(K + 1)
        m = mode_multiplicity(K) * kw
        m[0] = 0.0  # nonzero modes only
        dens = np.einsum(
            "k,ckj->j", m, W.real ** 2 + W.imag ** 2
        )
        return float(np.max(np.sqrt(dens[mask])))
    raise DomainError(
        f"unknown quantity {quantity!r}; valid ids: {', '.join(QUANTITY_IDS)}"
    )


def fit_decay(run, quantity, region="interior", window=None):
    """Fit sup-norm decay over the snapshot series of a run.

    `run` needs `.snapshots` [(t, W, dW), ...] and `.t_final`; the window
    defaults to [t_final/4, t_final] and must span at least two doublings.
    A series that touches zero cannot be fit in log space and comes back
    flagged degenerate instead.
    """
    if region != "interior":
        raise DomainError(f"unsupported region {region!r}; only 'interior'")
    if quantity not in QUANTITY_IDS:
        raise UnknownQuantityError(
            f"unknown quantity {quantity!r}; valid ids: {', '.join(QUANTITY_IDS)}"
        )
    if window is None:
        window = (run.t_final / 4.0, run.t_final)
    t_lo, t_hi = float(window[0]), float(window[1])
    if not t_hi / t_lo >= 4.0 - 1e-12:
        raise WindowTooShortError(
            f"window [{t_lo}, {t_hi}] spans less than two doublings"
        )
    dr = run.config.dr
    times, sups = [], []
    for t, W, dW in run.snapshots:
        if t_lo - 1e-9 <= t <= t_hi + 1e-9:
            times.append(t)
            sups.append(_interior_sup(t, W, dW, dr, quantity))
    if len(times) < 2:
        raise WindowTooShortError(
            f"only {len(times)} snapshots inside [{t_lo}, {t_hi}]"
        )
    times = np.array(times)
    sups = np.array(sups)
    if np.any(sups <= 0.0):
        return DecayFit(quantity, t_lo, t_hi, math.nan, math.nan, math.nan,
                        len(times), degenerate=True)
    slope, intercept = np.polyfit(np.log(times), np.log(sups), 1)
    pred = slope * np.log(times) + intercept
    residual = float(np.sqrt(np.mean((pred - np.log(sups)) ** 2)))
    return DecayFit(quantity, t_lo, t_hi, float(slope),
                    float(math.exp(intercept)), residual, len(times))


# ======================================================================
# trial fields (analytic, sympy-backed)
# ======================================================================

_T, _R, _Y = sp.symbols("t r y", real=True)


@dataclass(frozen=True)
class TrialField:
    """Closed-form scalar field w(t, r, y) with exact symbolic derivatives.

    `compact` marks compact support in r on every time slice (the Hardy
    hypothesis); `cone_smooth` marks smoothness in the interior cone
    (fields carrying (2+r-t)^-m factors blow up at t = r+2 and are only
    usable on exterior slices)."""

    id: str
    expr: sp.Expr
    compact: bool
    cone_smooth: bool


def _bump(c, sigma):
    arg = 1 - ((_R - _T - c) / sigma) ** 2
    return sp.Piecewise((arg ** 3, arg > 0), (0, True))


def _gauss(c, sigma):
    return sp.exp(-(((_R - _T - c) / sigma) ** 2))


def trial_family():
    """The frozen 12-member reference family used to calibrate constants."""
    q = 2 + _R - _T
    return (
        TrialField("gauss-m1", _gauss(5, 2) / q, False, False),
        TrialField("gauss-m3", _gauss(5, 2) / q ** 3, False, False),
        TrialField("gauss-m6", _gauss(5, 2) / q ** 6, False, False),
        TrialField("gauss-shift", _gauss(10, 2), False, True),
        TrialField("gauss-y", _gauss(5, 2) * (1 + sp.cos(_Y) / 2), False, True),
        TrialField("bump-near", _bump(3, 2), True, True),
        TrialField("bump-far", _bump(9, 4), True, True),
        TrialField("bump-y", _bump(5, 3) * (1 + sp.sin(_Y) / 3), True, True),
        TrialField("bump-weighted", _bump(4, 1) / q ** 2, True, False),
        TrialField("cone-static", sp.exp(-(((_R - 8) / 2) ** 2)) / _T, False, True),
        TrialField("cone-origin", sp.exp(-((_R / 3) ** 2)) / sp.sqrt(_T), False, True),
        TrialField("cone-travel", 2 * sp.exp(-(((_R - _T / 2) / 3) ** 2)) / _T,
                    False, True),
    )


_LETTER_OPS = {
    VectorFieldId.DT: lambda e: sp.diff(e, _T),
    VectorFieldId.DR: lambda e: sp.diff(e, _R),
    VectorFieldId.DY: lambda e: sp.diff(e, _Y),
    VectorFieldId.BOOST_R: lambda e: _T * sp.diff(e, _R) + _R * sp.diff(e, _T),
}

_LAMBDIFY_CACHE = {}


def _word_fn(trial, word, d_r=False):
    """Numeric (t, r, y) evaluator of the word derivative of a trial field,
    optionally with one extra radial derivative; exact via sympy."""
    key = (trial.id, word, d_r)
    if key not in _LAMBDIFY_CACHE:
        expr = trial.expr
        for letter in word:
            expr = _LETTER_OPS[letter](expr)
        if d_r:
            expr = sp.diff(expr, _R)
        _LAMBDIFY_CACHE[key] = sp.lambdify((_T, _R, _Y), expr, "numpy")
    return _LAMBDIFY_CACHE[key]


def _eval_grid(fn, t, r, y):
    """Evaluate a lambdified scalar on an (r, y) product grid, tolerating
    constant expressions that collapse to scalars."""
    out = fn(t, r[:, None], y[None, :])
    return np.broadcast_to(np.asarray(out, dtype=float), (r.size, y.size))


# -- quadrature grids fixed by the calibration --------------------------
_N_GL = 4096
_N_SUP = 20001
_M_Y = 8
_R_SPAN = 60.0


_GL_UNIT = None


def _exterior_nodes(t):
    """Gauss-Legendre nodes/weights on [t-1, t+span] plus a dense sup grid."""
    global _GL_UNIT
    if _GL_UNIT is None:
        _GL_UNIT = np.polynomial.legendre.leggauss(_N_GL)
    x, w = _GL_UNIT
    a, b = t - 1.0, t + _R_SPAN
    r_gl = 0.5 * (b - a) * x + 0.5 * (b + a)
    w_gl = 0.5 * (b - a) * w
    r_sup = np.linspace(a, b, _N_SUP)
    y = 2.0 * math.pi * np.arange(_M_Y) / _M_Y
    return r_gl, w_gl, r_sup, y


@dataclass
class InequalityCheck:
    """One lemma evaluation: pass iff lhs <= c_star * rhs."""

    lemma: str
    trial: str
    lhs: float
    rhs: float
    ratio: float
    c_star: float
    passed: bool


def _frozen_c_star(lemma):
    from . import _calibration

    return _calibration.C_STAR[lemma]


def _finish_check(lemma, trial_id, lhs, rhs, c_star):
    if c_star is None:
        c_star = _frozen_c_star(lemma)
    lhs, rhs = float(lhs), float(rhs)
    ratio = lhs / rhs if rhs > 0.0 else (0.0 if lhs == 0.0 else math.inf)
    return InequalityCheck(lemma, trial_id, lhs, rhs, ratio, c_star,
                           passed=bool(ratio <= c_star))


def check_weighted_sobolev(trial, beta, t=10.0, c_star=None):
    """Exterior-slice Sobolev trade: sup (2+r-t)^beta r^2 |w|^2 against the
    two-weight integral of d_r Z-words and Z-words up to order 2."""
    r_gl, w_gl, r_sup, y = _exterior_nodes(t)
    weight_sup = (2.0 + r_sup - t) ** beta * r_sup ** 2
    vals = _eval_grid(_word_fn(trial, ()), t, r_sup, y)
    lhs = float(np.max(weight_sup[:, None] * vals ** 2))

    wp = (2.0 + r_gl - t) ** (beta + 1.0)
    wm = (2.0 + r_gl - t) ** (beta - 1.0)
    area = 4.0 * math.pi * r_gl ** 2
    rhs = 0.0
    for word in iter_words(2):
        g = _eval_grid(_word_fn(trial, word.word), t, r_gl, y)
        gr = _eval_grid(_word_fn(trial, word.word, d_r=True), t, r_gl, y)
        # y-mean over the uniform nodes is exact for these trig polynomials
        rhs += float(np.sum(
            w_gl * area * (wp * np.mean(gr ** 2, axis=1)
                           + wm * np.mean(g ** 2, axis=1))
        )) * 2.0 * math.pi
    return _finish_check("weighted-sobolev", trial.id, lhs, rhs, c_star)


def check_hardy(trial, beta, t=10.0, c_star=None):
    """Exterior Hardy trade: the (2+r-t)^beta mass of w against the
    (2+r-t)^(beta+2) mass of d_r w; needs beta > -1 and compact support."""
    if beta <= -1.0:
        raise DomainError(f"Hardy inequality needs beta > -1, got {beta}")
    if not trial.compact:
        raise NotCompactlySupportedError(
            f"trial field {trial.id!r} is not compactly supported in r"
        )
    r_gl, w_gl, _, y = _exterior_nodes(t)
    area = 4.0 * math.pi * r_gl ** 2
    w_vals = _eval_grid(_word_fn(trial, ()), t, r_gl, y)
    wr_vals = _eval_grid(_word_fn(trial, (), d_r=True), t, r_gl, y)
    base = (2.0 + r_gl - t)
    lhs = float(np.sum(w_gl * area * base ** beta
                       * np.mean(w_vals ** 2, axis=1))) * 2.0 * math.pi
    rhs = float(np.sum(w_gl * area * base ** (beta + 2.0)
                       * np.mean(wr_vals ** 2, axis=1))) * 2.0 * math.pi
    return _finish_check("hardy", trial.id, lhs, rhs, c_star)


# ======================================================================
# Klainerman-Sobolev on hyperboloids
# ======================================================================

def _radial_interp(arr, r, dr):
    """Cubic Lagrange in radius on the last axis at a real radius r."""
    J = arr.shape[-1] - 1
    pos = r / dr
    j0 = int(min(max(math.floor(pos) - 1, 0), J - 3))
    js = np.arange(j0, j0 + 4)
    coeffs = np.ones(4)
    for a in range(4):
        for b in range(4):
            if a != b:
                coeffs[a] *= (pos - js[b]) / (js[a] - js[b])
    return np.tensordot(arr[..., j0:j0 + 4], coeffs, axes=([-1], [0]))


_KS_WORDS = (
    (),
    (VectorFieldId.BOOST_R,),
    (VectorFieldId.BOOST_R, VectorFieldId.BOOST_R),
)


def _ball_fraction(r_c, rho, radius):
    """Fraction of the origin-centred sphere of radius rho lying inside the
    ball B(x, radius) with |x| = r_c (spherical-cap geometry)."""
    if r_c == 0.0:
        return (rho <= radius).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        cosang = np.where(rho > 0.0,
                          (r_c ** 2 + rho ** 2 - radius ** 2) / (2.0 * r_c * rho),
                          np.where(radius >= r_c, -1.0, 1.0))
    return np.clip(0.5 * (1.0 - cosang), 0.0, 1.0)


def check_klainerman_sobolev(history, s, probes=None, c_star=None):
    """Pointwise-from-average bound on the zero modes over H_s:

        |W_0(t,x)|^2 <= C* t^{-3} sum_{|g|<=2} int_{B(x,t/3)} |Z^g W_0|^2 dy,

    with Z the Lorentz boosts, reduced radially to the single combination
    B = r d_t + t d_r; the ball integral runs over the hyperboloid chart
    y -> (sqrt(s^2+|y|^2), y).  Returns the worst probe as the check."""
    if probes is None:
        probes = (0.0, s, 2.0 * s)
    split = (s * s - 1.0) / 2.0
    leaf = hyperboloid_slice(s, Branch.FULL, history.J * history.dr,
                             history.J + 1)
    ops = [word_expansion(w) for w in _KS_WORDS]

    worst = None
    for r_probe in probes:
        if not 0.0 <= r_probe < split:
            raise DomainError(
                f"probe r = {r_probe} is not on the interior branch of H_{s}"
            )
        t_probe = math.sqrt(s * s + r_probe * r_probe)
        radius = t_probe / 3.0
        w_col = _radial_interp(history.interp_table((0, 0), t_probe),
                               r_probe, history.dr)
        lhs = float(np.sum(np.abs(w_col[:, 0]) ** 2))

        frac = _ball_fraction(r_probe, leaf.r, radius)
        total = 0.0
        for j, w_cell, f in zip(leaf.j, leaf.w, frac):
            if w_cell * f == 0.0:
                continue
            j = int(j)
            rho = j * history.dr
            t_j = math.sqrt(s * s + rho * rho)
            f0, bf, bbf = (
                float(np.sum(np.abs(expansion_node(history, op, t_j, j)[0][:, 0]) ** 2))
                for op in ops
            )
            dens = f0 + (1.0 + 2.0 * (t_j / rho) ** 2) * bf + bbf
            total += w_cell * f * dens
        rhs = total / t_probe ** 3
        chk = _finish_check("klainerman-sobolev", "run", lhs, rhs, c_star)
        if worst is None or chk.ratio > worst.ratio:
            worst = chk
    return worst


# ======================================================================
# calibration
# ======================================================================

def _ks_history_from_trial(trial, dr=0.05, J=280, t0=4.4, t1=15.0, dt=0.1):
    """Analytic single-mode history from a cone-smooth trial field (its
    y-average goes in the zero mode of component 0)."""
    w_expr = sp.integrate(trial.expr, (_Y, 0, 2 * sp.pi)) / (2 * sp.pi)
    fns = [sp.lambdify((_T, _R), sp.diff(w_expr, _T, n), "numpy")
           for n in range(3)]
    r = np.arange(J + 1) * dr

    def level(n, t):
        W = np.zeros((2, 1, J + 1), complex)
        W[0, 0] = np.broadcast_to(np.asarray(fns[n](t, r), dtype=float),
                                  (J + 1,))
        return W

    hist = StateHistory(
        0, J, dr,
        second_deriv=lambda W, dW, t: level(2, t),
    )
    n_lv = int(round((t1 - t0) / dt))
    for i in range(n_lv + 1):
        t = t0 + i * dt
        hist.push(t, level(0, t), level(1, t))
    return hist


def calibrate_constants(beta=0.0, ks_s=5.0, rhs_floor=1e-18):
    """Recompute the per-lemma reference ratios over the frozen family and
    the constants C* = 2 x (max admissible ratio).  The repo freezes the
    result in _calibration.py; a test regenerates and compares."""
    ratios = {"weighted-sobolev": {}, "hardy": {}, "klainerman-sobolev": {}}
    for trial in trial_family():
        chk = check_weighted_sobolev(trial, beta, c_star=math.inf)
        if chk.rhs > rhs_floor:
            ratios["weighted-sobolev"][trial.id] = chk.ratio
        if trial.compact:
            chk = check_hardy(trial, beta, c_star=math.inf)
            if chk.rhs > rhs_floor:
                ratios["hardy"][trial.id] = chk.ratio
        if trial.cone_smooth:
            hist = _ks_history_from_trial(trial)
            chk = check_klainerman_sobolev(hist, ks_s, c_star=math.inf)
            if chk.rhs > rhs_floor:
                ratios["klainerman-sobolev"][trial.id] = chk.ratio
    c_star = {lemma: 2.0 * max(vals.values()) for lemma, vals in ratios.items()}
    return c_star, ratios


# ======================================================================
# ray diagnostic (rescaled nonzero-mode quantities along a hyperbolic ray)
# ======================================================================

@dataclass
class RayReport:
    """Sampled Y, A, B along the ray plus the integrated Gronwall bound
    Y(end) <= (Y(start) + int B) * exp(int A) that they must satisfy."""

    base: tuple
    lam: np.ndarray
    Y: np.ndarray
    A: np.ndarray
    B: np.ndarray
    bound: float
    ratio: float  # Y(end) / bound
    forcing_residual: float | None = None


def _ray_point_tables(history, t, r):
    """All derivative columns needed at an off-grid point (radial cubic
    Lagrange of the time-interpolated tables)."""
    keys = ((0, 0), (1, 0), (0, 1), (0, 2), (1, 1), (2, 0))
    return {k: _radial_interp(history.interp_table(k, t), r, history.dr)
            for k in keys}


def _mode_product(u_modes, g_modes, K):
    """Dealiased mode coefficients of (u * g) from mode columns."""
    M = oversample_size(K)
    us = to_samples(u_modes, M)
    gs = to_samples(g_modes, M)
    return decompose(us[None, :] * gs, K)


def ray_diagnostic(history, base, lam, config=None):
    """Sample the rescaled-field quantities along {(lam*t/s, lam*r/s)}:

        Y^2 = int lam |(3/2) Wt + S Wt|^2 + lam^3 (1+u) |d_y Wt|^2 dy
        A   = sup |(1/2 lam) S u| + sup |d_y u|
        B^2 = int lam^{-1} |R Wt|^2 dy

    where Wt is the nonzero-mode part, S = t d_t + r d_r, and R combines
    the good second-order derivatives with the reconstructed forcing:
    R = t^2 dbar^2 + (2 s^2/r + 3r) dbar + 3/4 - s^2 F.  The forcing is
    rebuilt from the history's equation callback, so B is evaluated at the
    scheme's native order; passing the run config also evaluates the
    quadratic terms directly and reports the mismatch."""
    t_b, r_b = base
    if t_b <= abs(r_b):
        raise DomainError(f"base point (t={t_b}, r={r_b}) not inside the cone")
    s_b = math.sqrt(t_b * t_b - r_b * r_b)
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 1 or lam.size < 2 or np.any(np.diff(lam) <= 0):
        raise DomainError("lambda grid must be a strictly increasing 1-d array")

    K = history.K
    k_idx = np.arange(K + 1)
    ik = 1j * k_idx
    mvec = mode_multiplicity(K)
    tilde = np.ones(K + 1)
    tilde[0] = 0.0
    M = oversample_size(K)
    r_max = history.J * history.dr

    res_diff, res_scale = 0.0, 0.0
    Y = np.empty(lam.size)
    A = np.empty(lam.size)
    B = np.empty(lam.size)
    for i, lv in enumerate(lam):
        t = lv * t_b / s_b
        r = lv * r_b / s_b
        if not 0.0 <= r <= r_max:
            raise RayLeavesDomainError(
                f"ray point r = {r:.3f} outside the radial grid"
            )
        try:
            cols = _ray_point_tables(history, t, r)
        except HistoryGapError as exc:
            raise RayLeavesDomainError(
                f"ray point t = {t:.3f} outside the buffered history"
            ) from exc
        w, wt, wr = cols[(0, 0)], cols[(1, 0)], cols[(0, 1)]
        wrr, wrt, wtt = cols[(0, 2)], cols[(1, 1)], cols[(2, 0)]

        # forcing of the nonzero-mode equation, scheme-native:
        # F_k = [-d_t^2 W + lap W - k^2 W + u d_y^2 W]_k  (k != 0),
        # F_0 = [u d_y^2 Wt]_0
        wyy = -(k_idx ** 2) * w * tilde
        p_modes = _mode_product(w[0], wyy, K)
        if r >= 0.5 * history.dr:
            lap = wrr + (2.0 / r) * wr
        else:
            lap = 3.0 * wrr
        forcing = -wtt + lap - (k_idx ** 2) * w + p_modes
        forcing = forcing * tilde + p_modes * (1.0 - tilde)

        if config is not None:
            diff, scale = _direct_forcing_gap(
                forcing, w, wt, wr, t, r, config, K, tilde
            )
            res_diff = max(res_diff, diff)
            res_scale = max(res_scale, scale)

        s2 = lv * lv
        wt_t = wt * tilde
        wr_t = wr * tilde
        rt = r / t
        dbar = wr_t + rt * wt_t
        dbar2 = (wrr + 2.0 * rt * wrt + rt * rt * wtt) * tilde \
            + (s2 / t ** 3) * wt_t
        if r >= 0.5 * history.dr:
            rw = t * t * dbar2 + (2.0 * s2 / r + 3.0 * r) * dbar \
                + 0.75 * w * tilde - s2 * forcing
        else:
            rw = (t * t + 2.0 * s2) * (wrr * tilde) \
                + (3.0 * s2 / t) * wt_t + 0.75 * w * tilde - s2 * forcing

        g = 1.5 * w * tilde + t * wt_t + r * wr_t
        y2_bulk = lv * float(np.sum(mvec * tilde * np.abs(g) ** 2))
        u_samp = to_samples(w[0], M)
        wy_samp = to_samples(w * tilde * ik, M)
        y2_quasi = lv ** 3 * 2.0 * math.pi * float(np.mean(
            (1.0 + u_samp) * np.sum(np.abs(wy_samp) ** 2, axis=0)
        ))
        Y[i] = math.sqrt(y2_bulk + y2_quasi)

        su_samp = to_samples(t * wt[0] + r * wr[0], M)
        uy_samp = to_samples(ik * w[0], M)
        A[i] = float(np.max(np.abs(su_samp)) / (2.0 * lv)
                     + np.max(np.abs(uy_samp)))
        B[i] = math.sqrt(float(np.sum(mvec * np.abs(rw) ** 2)) / lv)

    bound = (Y[0] + float(np.trapezoid(B, lam))) \
        * math.exp(float(np.trapezoid(A, lam)))
    ratio = Y[-1] / bound if bound > 0.0 else (0.0 if Y[-1] == 0.0 else math.inf)
    forcing_res = None
    if config is not None:
        forcing_res = res_diff / max(res_scale, 1e-300)
    return RayReport(base=(t_b, r_b), lam=lam, Y=Y, A=A, B=B, bound=bound,
                     ratio=ratio, forcing_residual=forcing_res)


def _direct_forcing_gap(forcing, w, wt, wr, t, r, config, K, tilde):
    """Re-evaluate the forcing directly from first derivatives and the
    manufactured fields (instead of through the equation callback); returns
    (max abs mismatch, max abs direct value) at this ray point.  The caller
    normalizes over the whole ray, so rays through near-zero forcing do not
    produce 0/0 ratios."""
    M = oversample_size(K)
    wt_s = to_samples(wt, M)
    wr_s = to_samples(wr, M)
    null_on = config.ablation == "NullOn"
    direct = np.zeros((2, K + 1), complex)
    if config.nonlinear_active:
        for c, mat in enumerate(config.nonlinearity):
            src = np.zeros(M)
            for a in (0, 1):
                for b in (0, 1):
                    coeff = mat[a][b]
                    if coeff == 0.0:
                        continue
                    prod = wt_s[a] * wt_s[b]
                    if null_on:
                        prod = prod - wr_s[a] * wr_s[b]
                    src += coeff * prod
            direct[c] = decompose(src, K)
    if config.forcing_case is not None:
        from .fields import manufactured

        case = manufactured(config.forcing_case)
        direct += case.fields(t, np.array([r]), K)[2][..., 0]
    wyy = -(np.arange(K + 1) ** 2) * w * tilde
    p_modes = _mode_product(w[0], wyy, K)
    direct = direct * tilde + p_modes * (1.0 - tilde)
    return (float(np.max(np.abs(forcing - direct))),
            float(np.max(np.abs(direct))))


# ======================================================================
# null ablation
# ======================================================================

@dataclass
class AblationReport:
    """Paired NullOn / NullOff comparison at one epsilon."""

    epsilon: float
    s_end_on: float
    s_end_off: float
    ratio_on: float       # E_in_0(s_end) / E_in_0(2), zero modes
    ratio_off: float
    status_on: str
    status_off: str
    blowup_on: tuple | None
    blowup_off: tuple | None
    fits_on: dict = field(default_factory=dict)
    fits_off: dict = field(default_factory=dict)
    bitwise_identical: bool = False
    ordering_ok: bool = False


def _energy_ratio(run, s_end):
    hist = run.history
    s_cov = math.sqrt(max(2.0 * (hist.t_last - hist.dr) - 1.0, 4.0))
    s_eff = min(s_end, s_cov)
    e2 = energy_interior(hist, 2.0, component="zero").value
    e_end = energy_interior(hist, s_eff, component="zero").value
    if e2 == 0.0:
        ratio = 1.0 if e_end == 0.0 else math.inf
    else:
        ratio = float(e_end / e2)
    return s_eff, ratio


def _fit_all(run):
    fits = {}
    for q in QUANTITY_IDS:
        try:
            f = fit_decay(run, q)
        except WindowTooShortError:
            fits[q] = None
            continue
        fits[q] = None if f.degenerate else f.exponent
    return fits


def _runs_identical(run_a, run_b):
    if len(run_a.snapshots) != len(run_b.snapshots):
        return False
    for (ta, Wa, dWa), (tb, Wb, dWb) in zip(run_a.snapshots, run_b.snapshots):
        if ta != tb or not np.array_equal(Wa, Wb) or not np.array_equal(dWa, dWb):
            return False
    return True


def ablation_compare(run_on, run_off, s_end=None):
    """Compare a null-form run against its NullOff twin: zero-mode interior
    energy growth, decay-fit exponents, and blowup events.  Configs must be
    identical up to the ablation flag."""
    cfg_on = asdict(run_on.config)
    cfg_off = asdict(run_off.config)
    if cfg_on.pop("ablation") != "NullOn" or cfg_off.pop("ablation") != "NullOff":
        raise ConfigMismatchError(
            "expected run_on with ablation='NullOn' and run_off with 'NullOff'"
        )
    if cfg_on != cfg_off:
        diff = [k for k in cfg_on if cfg_on[k] != cfg_off[k]]
        raise ConfigMismatchError(
            f"configs differ beyond the ablation flag: {', '.join(diff)}"
        )
    if s_end is None:
        s_end = math.sqrt(2.0 * run_on.config.t_end - 1.0)
    s_on, ratio_on = _energy_ratio(run_on, s_end)
    s_off, ratio_off = _energy_ratio(run_off, s_end)
    blow_on = getattr(run_on, "blowup", None)
    blow_off = getattr(run_off, "blowup", None)
    report = AblationReport(
        epsilon=run_on.config.epsilon,
        s_end_on=s_on, s_end_off=s_off,
        ratio_on=ratio_on, ratio_off=ratio_off,
        status_on=run_on.status, status_off=run_off.status,
        blowup_on=blow_on, blowup_off=blow_off,
        fits_on=_fit_all(run_on), fits_off=_fit_all(run_off),
        bitwise_identical=_runs_identical(run_on, run_off),
    )
    report.ordering_ok = bool(
        ratio_off > ratio_on
        or (blow_off is not None and blow_on is None)
    )
    return report
