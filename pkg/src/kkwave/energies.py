"""Energy diagnostics on hyperboloidal and constant-time leaves.

Every functional here is a weighted L^2 integral of first derivatives of the
mode towers W[c, k, j].  Radial reduction fixes the conventions:

* the interior/exterior hyperboloid energy uses the projection measure
  4 pi r^2 dr dy on H_s = {t = sqrt(s^2 + r^2)};
* y-integrals of squared fields are evaluated by Parseval: the zero mode
  carries 2 pi, each stored mode k >= 1 carries 4 pi (it represents the
  +-k pair), so the zero-mode / nonzero-mode split is exactly additive;
* the conformal functionals act on the zero modes alone and integrate over
  R^3 only (no circle factor), matching their flat-space definition;
* for radial fields the good derivatives collapse to scalar combinations:
  sum_i |dbar_i W|^2 = |W_r + (r/t) W_t|^2, sum_i |T_i W|^2 = |W_r + W_t|^2,
  sum_i |Omega_{0i} W|^2 = |t W_r + r W_t|^2, and rotations vanish.

The two algebraic expressions of the hyperboloid energy,

    (s/t)^2|W_t|^2 + |dbar W|^2   and   (s/t)^2|W_r|^2 + |SW/t|^2,

coincide identically once t^2 - r^2 = s^2, whatever values W_t and W_r hold,
so their agreement is a structural check of the quadrature, not of the data.

Fields are pulled back onto leaves through the history's cubic time
interpolation; vector-field words are applied node-wise via
fields.expansion_node.  This module never imports the solver — equation
information enters only through the history's second_deriv callback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyBranchError, OrderTooHighError, SandwichViolatedError
from .fields import (
    expansion_node,
    oversample_size,
    radial_derivative_array,
    to_samples,
    word_expansion,
)
from .geometry import Branch, MultiIndex, hyperboloid_slice, iter_words

__all__ = [
    "EnergyReport",
    "mode_multiplicity",
    "hyperboloid_energy",
    "energy_interior",
    "energy_exterior_hyperboloid",
    "energy_exterior",
    "x_norm_accumulate",
    "conformal_interior",
    "conformal_exterior",
    "quasilinear_correction",
    "higher_order_energy",
]

N_VF_DEFAULT = 2

_IDENTITY_WORD = (MultiIndex(()),)


@dataclass
class EnergyReport:
    """One functional evaluation on one leaf.

    `leaf` is ("s", value) for hyperboloids or ("t", value) for time slices;
    `values` maps functional ids to reals, first entry = headline value;
    `order` is (n, k) for higher-order sums; `alpha` the exterior weight
    exponent where one applies.
    """

    leaf: tuple
    values: dict
    order: tuple | None = None
    alpha: float | None = None

    @property
    def value(self):
        return next(iter(self.values.values()))


def mode_multiplicity(K):
    """y-measure of each stored mode: 2 pi for k = 0, 4 pi for the +-k pairs."""
    m = np.full(K + 1, 4.0 * math.pi)
    m[0] = 2.0 * math.pi
    return m


def _component_mask(K, component):
    mask = np.ones(K + 1)
    if component == "both":
        return mask
    if component == "zero":
        mask[1:] = 0.0
        return mask
    if component == "tilde":
        mask[0] = 0.0
        return mask
    raise DomainError(f"unknown component {component!r}; use both/zero/tilde")


def _abs2(z):
    return z.real ** 2 + z.imag ** 2


def _leaf_slice(history, s, branch):
    return hyperboloid_slice(
        s, branch, history.J * history.dr, history.J + 1
    )


def hyperboloid_energy(history, s, branch, component="both", words=_IDENTITY_WORD):
    """Engine for every hyperboloid energy: sum over `words` of the energy of
    the word field on the requested branch of H_s.  Returns the pair of
    totals from the two algebraic expressions of the integrand."""
    if isinstance(branch, str):
        branch = Branch(branch)
    leaf = _leaf_slice(history, s, branch)
    mvec = mode_multiplicity(history.K) * _component_mask(history.K, component)
    k2 = np.arange(history.K + 1) ** 2
    ops = [(word_expansion(w.word), w.parity) for w in words]

    total_1 = total_2 = 0.0
    for j, w_cell in zip(leaf.j, leaf.w):
        j = int(j)
        r = j * history.dr
        t = math.sqrt(s * s + r * r)
        st2 = (s / t) ** 2
        dens_1 = dens_2 = 0.0
        for op, parity in ops:
            x, x_t, x_r = expansion_node(history, op, t, j, parity=parity)
            y_dens = k2 * _abs2(x)
            bar = x_r + (r / t) * x_t
            sw_over_t = x_t + (r / t) * x_r
            dens_1 += float(np.sum(mvec * (st2 * _abs2(x_t) + _abs2(bar) + y_dens)))
            dens_2 += float(
                np.sum(mvec * (st2 * _abs2(x_r) + _abs2(sw_over_t) + y_dens))
            )
        total_1 += w_cell * dens_1
        total_2 += w_cell * dens_2
    return total_1, total_2


def energy_interior(history, s, component="both"):
    """Hyperboloid energy on the interior branch r < (s^2-1)/2, reported in
    both equivalent forms (time-gauge and scaling-gauge integrands)."""
    v1, v2 = hyperboloid_energy(history, s, Branch.INTERIOR, component)
    return EnergyReport(leaf=("s", s), values={"E_in": v1, "E_in_alt": v2})


def energy_exterior_hyperboloid(history, s, component="both"):
    """Same integrand on the exterior branch r >= (s^2-1)/2 of H_s."""
    v1, v2 = hyperboloid_energy(history, s, Branch.EXTERIOR, component)
    return EnergyReport(leaf=("s", s), values={"E_ex_h": v1, "E_ex_h_alt": v2})


def _exterior_cell_lengths(t, J, dr):
    """Dual-cell overlap of each radial node with {r >= t-1}; the straddling
    cell carries its exterior fraction so slice splits are exactly additive."""
    r = np.arange(J + 1) * dr
    a = np.maximum(r - 0.5 * dr, 0.0)
    b = np.minimum(r + 0.5 * dr, J * dr)
    length = np.clip(b - np.maximum(a, t - 1.0), 0.0, None)
    if not np.any(length > 0.0):
        raise EmptyBranchError(
            f"exterior region r >= {t - 1.0} does not meet the grid"
        )
    return r, length


def _state_arrays(state):
    return state.W, state.dW, state.dr


def energy_exterior(state, t, alpha, component="both"):
    """Weighted exterior energy on the time slice t:
    (2+r-t)^(alpha+1) (|W_t|^2 + |W_r|^2 + |W_y|^2) over {r >= t-1},
    with the integrand density at r_max reported for support containment."""
    W, dW, dr = _state_arrays(state)
    K, J = W.shape[1] - 1, W.shape[2] - 1
    if t is None:
        t = state.t
    r, length = _exterior_cell_lengths(t, J, dr)
    Wr = radial_derivative_array(W, dr, order=1)
    mvec = (mode_multiplicity(K) * _component_mask(K, component))[None, :, None]
    k2 = (np.arange(K + 1) ** 2)[None, :, None]
    dens = np.sum(mvec * (_abs2(dW) + _abs2(Wr) + k2 * _abs2(W)), axis=(0, 1))
    area = 4.0 * math.pi * r ** 2
    idx = length > 0.0
    weight = (2.0 + r[idx] - t) ** (alpha + 1.0)
    value = float(np.sum(weight * dens[idx] * area[idx] * length[idx]))
    boundary = float((2.0 + r[-1] - t) ** (alpha + 1.0) * dens[-1] * area[-1])
    return EnergyReport(
        leaf=("t", float(t)),
        values={"E_ex_alpha": value, "boundary_density": boundary},
        alpha=alpha,
    )


def x_norm_accumulate(running, state, t, dt, alpha, component="both"):
    """One rectangle of the space-time bulk term of the X-norm:

        running + dt * (1+alpha) * II (2+r-t)^alpha (|TW|^2 + |W_y|^2)

    with T = d_r + d_t the outgoing-cone tangential derivative.  The full
    X-norm squared is sup_t of the weighted exterior energy plus this
    accumulated bulk."""
    W, dW, dr = _state_arrays(state)
    K, J = W.shape[1] - 1, W.shape[2] - 1
    r, length = _exterior_cell_lengths(t, J, dr)
    Wr = radial_derivative_array(W, dr, order=1)
    mvec = (mode_multiplicity(K) * _component_mask(K, component))[None, :, None]
    k2 = (np.arange(K + 1) ** 2)[None, :, None]
    dens = np.sum(mvec * (_abs2(dW + Wr) + k2 * _abs2(W)), axis=(0, 1))
    idx = length > 0.0
    weight = (2.0 + r[idx] - t) ** alpha
    bulk = float(
        np.sum(weight * dens[idx] * 4.0 * math.pi * r[idx] ** 2 * length[idx])
    )
    return running + dt * (1.0 + alpha) * bulk


def conformal_interior(history, s):
    """Conformal energy of the zero modes on the interior hyperboloid branch:

        int t^{-2} |K W_0 + 2t W_0|^2 + (s/t)^2 |BoostR W_0|^2  dx

    with K = (t^2+r^2) d_t + 2rt d_r the Morawetz multiplier; the boost sum
    reduces radially to the single BoostR = t d_r + r d_t combination."""
    leaf = _leaf_slice(history, s, Branch.INTERIOR)
    op = word_expansion(())
    total = 0.0
    for j, w_cell in zip(leaf.j, leaf.w):
        j = int(j)
        r = j * history.dr
        t = math.sqrt(s * s + r * r)
        x, x_t, x_r = expansion_node(history, op, t, j)
        w0, w0_t, w0_r = x[:, 0], x_t[:, 0], x_r[:, 0]
        morawetz = (t * t + r * r) * w0_t + 2.0 * r * t * w0_r + 2.0 * t * w0
        boost = t * w0_r + r * w0_t
        dens = float(
            np.sum(_abs2(morawetz) / t ** 2 + (s / t) ** 2 * _abs2(boost))
        )
        total += w_cell * dens
    return EnergyReport(leaf=("s", s), values={"E_c_in": total})


def conformal_exterior(state, t=None):
    """Exterior conformal energy of the zero modes on the time slice t:
    int_{r >= t-1} |S W_0 + 2 W_0|^2 + |BoostR W_0|^2 dx, S = t d_t + r d_r."""
    W, dW, dr = _state_arrays(state)
    J = W.shape[2] - 1
    if t is None:
        t = state.t
    r, length = _exterior_cell_lengths(t, J, dr)
    w0 = W[:, 0, :]
    w0_t = dW[:, 0, :]
    w0_r = radial_derivative_array(w0, dr, order=1)
    scaling = t * w0_t + r * w0_r + 2.0 * w0
    boost = t * w0_r + r * w0_t
    dens = np.sum(_abs2(scaling) + _abs2(boost), axis=0)
    area = 4.0 * math.pi * r ** 2
    idx = length > 0.0
    value = float(np.sum((dens * area * length)[idx]))
    boundary = float(dens[-1] * area[-1])
    return EnergyReport(
        leaf=("t", float(t)),
        values={"E_c_ex": value, "boundary_density": boundary},
    )


def _y_cubic_density(u_modes, w_modes, K):
    """2 pi * mean_y of u |d_y W|^2 from mode columns; exact for the
    dealiased sample count since the integrand is a trigonometric
    polynomial of degree 3K < M."""
    M = oversample_size(K)
    ik = 1j * np.arange(K + 1)
    u_samp = to_samples(u_modes, M)
    wy_samp = to_samples(w_modes * ik, M)
    return 2.0 * math.pi * float(np.mean(u_samp * np.sum(_abs2(wy_samp), axis=0)))


def quasilinear_correction(source, base, *, s=None, t=None, alpha=None,
                           component="both"):
    """Cubic correction  II u |d_y W|^2  on the leaf of the named base
    functional ("E_in", "E_ex_h" on hyperboloid s; "E_ex_alpha" on slice t),
    plus the sandwich check: when max|u| <= 1/10 on the leaf, the corrected
    energy must lie in [0.9, 1.1] x base — a violation can only come from an
    inconsistent quadrature and raises SandwichViolatedError."""
    if base in ("E_in", "E_ex_h"):
        history = source
        if s is None:
            raise DomainError(f"base {base!r} needs the hyperboloid parameter s")
        branch = Branch.INTERIOR if base == "E_in" else Branch.EXTERIOR
        base_value = hyperboloid_energy(history, s, branch, component)[0]
        leaf = _leaf_slice(history, s, branch)
        K = history.K
        op = word_expansion(())
        correction = 0.0
        max_u = 0.0
        M = oversample_size(K)
        for j, w_cell in zip(leaf.j, leaf.w):
            j = int(j)
            r = j * history.dr
            tt = math.sqrt(s * s + r * r)
            cols = expansion_node(history, op, tt, j)[0]
            u_samp = to_samples(cols[0], M)
            max_u = max(max_u, float(np.max(np.abs(u_samp))))
            mask = _component_mask(K, component)
            correction += w_cell * _y_cubic_density(cols[0], cols * mask, K)
        leaf_id = ("s", s)
    elif base == "E_ex_alpha":
        state = source
        if t is None:
            t = state.t
        if alpha is None:
            raise DomainError("base 'E_ex_alpha' needs the weight exponent alpha")
        base_value = energy_exterior(state, t, alpha, component).value
        W, dW, dr = _state_arrays(state)
        K, J = W.shape[1] - 1, W.shape[2] - 1
        r, length = _exterior_cell_lengths(t, J, dr)
        M = oversample_size(K)
        ik = 1j * np.arange(K + 1)
        mask = _component_mask(K, component)
        u_samp = to_samples(np.moveaxis(W[0], 0, -1), M)          # (J+1, M)
        wy_samp = to_samples(np.moveaxis(W * mask[None, :, None] * ik[None, :, None], 1, -1), M)
        dens = 2.0 * math.pi * np.mean(
            u_samp * np.sum(_abs2(wy_samp), axis=0), axis=-1
        )
        idx = length > 0.0
        correction = float(np.sum((dens * 4.0 * math.pi * r ** 2 * length)[idx]))
        max_u = float(np.max(np.abs(u_samp[idx])))
        leaf_id = ("t", float(t))
    else:
        raise DomainError(f"unknown base functional {base!r}")

    quasi = base_value + correction
    if max_u <= 0.1 + 1e-15:
        slack = 1e-12 * max(base_value, 1.0)
        if not (0.9 * base_value - slack <= quasi <= 1.1 * base_value + slack):
            raise SandwichViolatedError(
                f"max|u| = {max_u:.3g} <= 1/10 but E_quasi = {quasi:.6g} is "
                f"outside [0.9, 1.1] x {base_value:.6g}"
            )
    return EnergyReport(
        leaf=leaf_id,
        values={
            "correction": correction,
            "base": base_value,
            "quasi": quasi,
            "max_u": max_u,
        },
        alpha=alpha,
    )


def higher_order_energy(history, s, n, k, base="E_in", component="both",
                        n_vf=N_VF_DEFAULT):
    """Sum of the base hyperboloid energy over all words of length <= n in
    {Dt, Dr, Dy, BoostR} with at most k BoostR factors (the (n, k) index
    family), e.g. order (2, 0) adds pure coordinate derivatives only."""
    if n > n_vf:
        raise OrderTooHighError(f"order n = {n} exceeds the cap n_vf = {n_vf}")
    if n < 0 or k < 0:
        raise DomainError(f"orders must be nonnegative, got ({n}, {k})")
    if base == "E_in":
        branch = Branch.INTERIOR
    elif base == "E_ex_h":
        branch = Branch.EXTERIOR
    else:
        raise DomainError(f"unknown base functional {base!r}")
    words = tuple(iter_words(n, boost_max=k))
    v1, v2 = hyperboloid_energy(history, s, branch, component, words=words)
    return EnergyReport(
        leaf=("s", s),
        values={"E": v1, "E_alt": v2, "n_words": float(len(words))},
        order=(n, k),
    )
