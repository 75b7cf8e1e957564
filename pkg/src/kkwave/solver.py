"""Method-of-lines evolution of the mode-reduced system.

The unknown is the pair W = (u, v) stored as complex mode towers
W[c, k, j] = W^c_k(r_j), k = 0..K, on the uniform radial grid r_j = j dr.
Each mode obeys

    d_t^2 W_k = Lap_r W_k - k^2 W_k + [u d_y^2 W]_k - [N(W, W)]_k - G_k

where Lap_r = d_r^2 + (2/r) d_r (with the regular-origin limit 3 d_r^2 at
r = 0), the bracketed quadratic terms are formed pseudospectrally on the
oversampled y-grid, N_c = sum_ij A^c_ij Q(w_i, w_j) with Q the Q0 null form
(or the non-null product d_t w_i d_t w_j under the NullOff ablation), and
G is an optional manufactured forcing.  Compactly supported data plus the
causality margin J dr >= t_end + R0 make the zero Dirichlet ghost at the
outer edge invisible to the solution, so no radiation condition is needed.

Time stepping is classical RK4 on (W, d_t W); with |u| <= 1/10 the modified
principal symbol stays uniformly hyperbolic and the CFL bound dt <= dr/2 is
safe (a NaN guard catches violations).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, ConfigError, NonFiniteError
from .fields import (
    ModeField,
    StateHistory,
    decompose,
    manufactured,
    oversample_size,
    radial_derivative_array,
    to_samples,
)

__all__ = [
    "SolverConfig",
    "EvolvedPair",
    "RunResult",
    "initial_data",
    "rhs",
    "step",
    "run",
    "laplacian_radial",
    "linear_flat_energy",
    "data_support_radius",
    "case_config",
    "FULL_COUPLING",
    "ZERO_COUPLING",
]

FULL_COUPLING = ((1.0, 1.0), (1.0, 1.0))
ZERO_COUPLING = ((0.0, 0.0), (0.0, 0.0))


@dataclass(frozen=True)
class SolverConfig:
    """Grid, data, and nonlinearity selection for one evolution."""

    K: int = 2
    J: int = 160
    dr: float = 0.1
    dt: float = 0.05
    t_end: float = 6.0
    epsilon: float = 0.01
    alpha: float = 0.25
    width: float = 1.0
    a_coeffs: tuple = (1.0, 1.0)
    b_coeffs: tuple = (0.0,)
    nonlinearity: tuple = (FULL_COUPLING, FULL_COUPLING)
    quasilinear_on: bool = True
    ablation: str = "NullOn"
    forcing_case: str | None = None
    data_from_case: bool = False
    snapshot_every: int = 8
    history_depth: int | None = 8
    blowup_factor: float = 1e3
    cfl_max: float = 0.5

    def __post_init__(self):
        if self.K < 0 or self.J < 4:
            raise ConfigError(f"grid too small: K={self.K}, J={self.J}")
        if self.dr <= 0.0 or self.dt <= 0.0:
            raise ConfigError("dr and dt must be positive")
        if not 0.0 < self.cfl_max <= 0.5:
            raise ConfigError(f"cfl_max must lie in (0, 0.5], got {self.cfl_max}")
        if self.dt > self.cfl_max * self.dr + 1e-15:
            raise ConfigError(
                f"dt = {self.dt} violates dt <= {self.cfl_max}*dr = "
                f"{self.cfl_max * self.dr}"
            )
        if self.t_end <= 2.0:
            raise ConfigError(f"t_end must exceed the initial time 2, got {self.t_end}")
        if self.ablation not in ("NullOn", "NullOff"):
            raise ConfigError(f"unknown ablation {self.ablation!r}")
        if not self.data_from_case and (
            len(self.a_coeffs) > self.K + 1 or len(self.b_coeffs) > self.K + 1
        ):
            raise ConfigError("more data mode coefficients than modes (K+1)")
        R0 = data_support_radius(self)
        if math.isfinite(R0) and self.J * self.dr < self.t_end + R0:
            raise ConfigError(
                f"causality margin violated: J*dr = {self.J * self.dr} < "
                f"t_end + R0 = {self.t_end + R0}; enlarge the grid"
            )

    @property
    def r(self):
        return np.arange(self.J + 1) * self.dr

    @property
    def nonlinear_active(self):
        return any(
            c != 0.0 for mat in self.nonlinearity for row in mat for c in row
        )


def data_support_radius(config):
    """Radius beyond which the initial data (and any forcing) is below
    round-off; the Gaussian profile exp(-r^2/w^2) reaches 1e-16 of its
    peak at r ~ 6.1 w."""
    if config.data_from_case:
        if config.forcing_case is None:
            raise ConfigError("data_from_case needs forcing_case set")
        return manufactured(config.forcing_case).support_radius
    radius = 0.0 if config.epsilon == 0.0 else 6.1 * config.width
    if config.forcing_case is not None:
        radius = max(radius, manufactured(config.forcing_case).support_radius)
    return radius


def _case_coupling(case):
    if not case.nonlinearity_on:
        return (ZERO_COUPLING, ZERO_COUPLING)
    return tuple(
        tuple(tuple(float(c) for c in row) for row in mat)
        for mat in (case.null_matrix_1, case.null_matrix_2)
    )


def case_config(case_id, **overrides):
    """A SolverConfig whose physics (coupling matrices, quasilinear flag,
    data, forcing) matches the named manufactured solution; grid and cadence
    come from overrides."""
    case = manufactured(case_id)
    kwargs = dict(
        K=case.K_min,
        forcing_case=case_id,
        data_from_case=True,
        quasilinear_on=case.quasilinear_on,
        nonlinearity=_case_coupling(case),
        epsilon=0.0,
    )
    kwargs.update(overrides)
    return SolverConfig(**kwargs)


@dataclass
class EvolvedPair:
    """State at one time: mode arrays (2, K+1, J+1) for (u, v) and d_t(u, v)."""

    t: float
    W: np.ndarray
    dW: np.ndarray
    dr: float

    @property
    def K(self):
        return self.W.shape[1] - 1

    @property
    def J(self):
        return self.W.shape[2] - 1

    def _mode_field(self, arr):
        return ModeField(K=self.K, dr=self.dr, t=self.t, data=arr)

    @property
    def U(self):
        return self._mode_field(self.W[0])

    @property
    def V(self):
        return self._mode_field(self.W[1])

    @property
    def dU(self):
        return self._mode_field(self.dW[0])

    @property
    def dV(self):
        return self._mode_field(self.dW[1])

    def check_finite(self):
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.dW))):
            raise NonFiniteError(f"non-finite state at t = {self.t}")
        return self


def initial_data(config):
    """Data at t = 2: u, v = eps * exp(-r^2/w^2) (a_0 + sum_k a_k cos(ky)),
    d_t(u, v) analogous with the b coefficients.  cos(ky) populates modes
    +-k, so the stored mode k >= 1 carries a_k/2."""
    if config.data_from_case:
        case = manufactured(config.forcing_case)
        W, dW, _ = case.fields(2.0, config.r, config.K)
        return EvolvedPair(t=2.0, W=W, dW=dW, dr=config.dr)
    shape = (2, config.K + 1, config.J + 1)
    W = np.zeros(shape, dtype=complex)
    dW = np.zeros(shape, dtype=complex)
    profile = config.epsilon * np.exp(-(config.r ** 2) / config.width ** 2)
    for coeffs, target in ((config.a_coeffs, W), (config.b_coeffs, dW)):
        for k, a_k in enumerate(coeffs):
            target[:, k, :] = (a_k if k == 0 else 0.5 * a_k) * profile
    return EvolvedPair(t=2.0, W=W, dW=dW, dr=config.dr)


def laplacian_radial(W, dr):
    """Lap_r = d_r^2 + (2/r) d_r on the last axis: centered second-order
    stencils, the parity limit 3 d_r^2 at the origin, and a zero Dirichlet
    ghost beyond j = J (never reached by causal solutions).  The interior
    rows are exactly self-adjoint in the r^2 dr inner product, which is
    what makes the discrete flat energy conserve."""
    J = W.shape[-1] - 1
    r = np.arange(1, J) * dr
    out = np.empty_like(W)
    out[..., 1:-1] = (W[..., 2:] - 2.0 * W[..., 1:-1] + W[..., :-2]) / (
        dr * dr
    ) + (W[..., 2:] - W[..., :-2]) / (r * dr)
    out[..., 0] = 6.0 * (W[..., 1] - W[..., 0]) / (dr * dr)
    out[..., -1] = (W[..., -2] - 2.0 * W[..., -1]) / (dr * dr) - W[..., -2] / (
        J * dr * dr
    )
    return out


def _mode_to_samples(modes, M):
    # (..., K+1, J+1) mode arrays -> real samples (..., J+1, M)
    return to_samples(np.moveaxis(modes, -2, -1), M)


def _samples_to_mode(samples, K):
    return np.moveaxis(decompose(samples, K), -1, -2)


def _acceleration(W, dW, t, config, forcing_fields=None):
    """d_t^2 of the mode towers; the quadratic terms are optional so the
    linear path stays allocation-light."""
    K = config.K
    k2 = (np.arange(K + 1) ** 2)[None, :, None]
    acc = laplacian_radial(W, config.dr) - k2 * W

    if config.quasilinear_on or config.nonlinear_active:
        M = oversample_size(K)
        if config.quasilinear_on:
            u_samp = _mode_to_samples(W[0], M)
            wyy_samp = _mode_to_samples(-k2 * W, M)
            acc += _samples_to_mode(u_samp[None, :, :] * wyy_samp, K)
        if config.nonlinear_active:
            wt = _mode_to_samples(dW, M)
            wr = _mode_to_samples(
                radial_derivative_array(W, config.dr, order=1), M
            )
            null_on = config.ablation == "NullOn"
            for c, mat in enumerate(config.nonlinearity):
                src = np.zeros((W.shape[-1], M))
                for i in (0, 1):
                    for j in (0, 1):
                        coeff = mat[i][j]
                        if coeff == 0.0:
                            continue
                        prod = wt[i] * wt[j]
                        if null_on:
                            prod = prod - wr[i] * wr[j]
                        src += coeff * prod
                acc[c] -= _samples_to_mode(src, K)

    if forcing_fields is not None:
        acc -= forcing_fields(t)
    return acc


def rhs(state, t, config, forcing_fields=None):
    """Time derivative of (W, dW): (dW, acceleration)."""
    state.check_finite()
    return state.dW, _acceleration(state.W, state.dW, t, config, forcing_fields)


def step(state, t, dt, config, forcing_fields=None, history=None):
    """One classical RK4 step of the first-order system; pushes the new
    level into ``history`` when one is given, otherwise pure."""
    W, dW = state.W, state.dW
    a1 = _acceleration(W, dW, t, config, forcing_fields)
    W1, dW1 = W + 0.5 * dt * dW, dW + 0.5 * dt * a1
    a2 = _acceleration(W1, dW1, t + 0.5 * dt, config, forcing_fields)
    W2, dW2 = W + 0.5 * dt * dW1, dW + 0.5 * dt * a2
    a3 = _acceleration(W2, dW2, t + 0.5 * dt, config, forcing_fields)
    W3, dW3 = W + dt * dW2, dW + dt * a3
    a4 = _acceleration(W3, dW3, t + dt, config, forcing_fields)
    W_new = W + (dt / 6.0) * (dW + 2.0 * dW1 + 2.0 * dW2 + dW3)
    dW_new = dW + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    out = EvolvedPair(t=t + dt, W=W_new, dW=dW_new, dr=config.dr).check_finite()
    if history is not None:
        history.push(out.t, out.W, out.dW)
    return out


def linear_flat_energy(W, dW, dr):
    """Discrete flat energy of the linear system, the exactly conserved
    quadratic form of the semidiscretization:

        E = sum_{c,k} m_k sum_{j>=1} r_j^2 dr
            ( |dW|^2 + Re(conj(W) (-Lap_d + k^2) W) )

    with m_k the y-measure of mode k (2 pi for k = 0, 4 pi for k >= 1) and
    a 4 pi from the angular x-integral.  The gradient term is the Dirichlet
    form of the discrete Laplacian, not a squared one-sided stencil — that
    is the version the evolution conserves (to RK4 drift).
    """
    J = W.shape[-1] - 1
    K = W.shape[-2] - 1
    dr = float(dr)
    w = (np.arange(J + 1) * dr) ** 2 * dr
    k2 = (np.arange(K + 1) ** 2)[None, :, None]
    m_k = np.full(K + 1, 4.0 * math.pi)
    m_k[0] = 2.0 * math.pi
    dens = (
        np.abs(dW) ** 2
        + np.real(np.conj(W) * (-laplacian_radial(W, dr) + k2 * W))
    )
    return float(4.0 * math.pi * np.einsum("k,ckj,j->", m_k, dens, w))


@dataclass
class RunResult:
    """Artifacts of one evolution (see ``run``)."""

    config: SolverConfig
    status: str
    t_final: float
    history: StateHistory
    snapshots: list = field(default_factory=list)
    energy_series: list = field(default_factory=list)
    log: list = field(default_factory=list)
    blowup: tuple | None = None

    @property
    def final_state(self):
        t, W, dW = self.snapshots[-1]
        return EvolvedPair(t=t, W=W, dW=dW, dr=self.config.dr)


def _forcing_evaluator(config):
    if config.forcing_case is None:
        return None
    case = manufactured(config.forcing_case)
    if (
        config.quasilinear_on != case.quasilinear_on
        or config.nonlinearity != _case_coupling(case)
    ):
        raise ConfigError(
            f"config physics does not match case {case.id!r}; "
            "build the config with case_config()"
        )
    r = config.r
    K = config.K
    return lambda t: case.fields(t, r, K)[2]


def run(config, observers=()):
    """Evolve from t = 2 to t_end, recording snapshots, the level history,
    the flat-energy series, and a step log.  Raises BlowUpError (with the
    partial RunResult attached as .partial) when the flat energy crosses
    blowup_factor x its initial value; raises NonFiniteError on NaN/Inf.
    """
    forcing = _forcing_evaluator(config)
    state = initial_data(config)
    n_steps = int(round((config.t_end - 2.0) / config.dt))

    second_deriv = lambda W, dW, t: _acceleration(W, dW, t, config, forcing)
    history = StateHistory(
        config.K, config.J, config.dr,
        depth=config.history_depth, second_deriv=second_deriv,
    )
    result = RunResult(
        config=config, status="Running", t_final=2.0, history=history
    )

    E0 = linear_flat_energy(state.W, state.dW, config.dr)
    ceiling = config.blowup_factor * E0 if E0 > 0.0 else math.inf

    def record(state, wall_per_step):
        result.snapshots.append((state.t, state.W.copy(), state.dW.copy()))
        energy = linear_flat_energy(state.W, state.dW, config.dr)
        result.energy_series.append((state.t, energy))
        max_u = float(np.max(np.abs(state.W[0])))
        cfl = (config.dt / config.dr) * math.sqrt(1.0 + max_u)
        result.log.append(
            {
                "t": state.t,
                "cfl": cfl,
                "max_w": float(np.max(np.abs(state.W))),
                "wall_per_step": wall_per_step,
            }
        )
        for observer in observers:
            observer(state, result)
        return energy

    history.push(state.t, state.W, state.dW)
    record(state, 0.0)
    clock = time.perf_counter()
    steps_since = 0

    def fail(t, norm):
        result.status = f"BlowUp(t={t:.6g})"
        result.t_final = t
        result.blowup = (t, norm)
        err = BlowUpError(t, norm, ceiling)
        err.partial = result
        raise err

    for m in range(n_steps):
        t = 2.0 + m * config.dt
        try:
            # overflow in a diverging ablation is expected; the guards below
            # turn it into a BlowUp report
            with np.errstate(over="ignore", invalid="ignore"):
                state = step(state, t, config.dt, config, forcing, history=history)
        except NonFiniteError:
            fail(t + config.dt, math.inf)
        steps_since += 1
        last = m == n_steps - 1
        if (m + 1) % config.snapshot_every == 0 or last:
            now = time.perf_counter()
            wall = (now - clock) / steps_since
            clock, steps_since = now, 0
            energy = record(state, wall)
            if energy > ceiling:
                fail(state.t, energy)

    result.status = "Completed"
    result.t_final = state.t
    return result
