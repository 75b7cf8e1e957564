"""Solver tests: exact linear oracles (Klein-Gordon modes, d'Alembert
pulse), manufactured-solution convergence, conservation, causality, and the
failure paths (config validation, blow-up reporting)."""

import math

import numpy as np
import pytest

import kkwave.fields as F
import kkwave.solver as S
from kkwave.errors import BlowUpError, ConfigError, NonFiniteError

ZERO = (S.ZERO_COUPLING, S.ZERO_COUPLING)


def _linear_config(**kw):
    base = dict(quasilinear_on=False, nonlinearity=ZERO)
    base.update(kw)
    return S.SolverConfig(**base)


# ----------------------------------------------------------------------
# configuration validation
# ----------------------------------------------------------------------

def test_config_rejects_cfl_violation():
    with pytest.raises(ConfigError):
        S.SolverConfig(dr=0.1, dt=0.06, t_end=4.0)


def test_config_rejects_missing_causality_margin():
    # J*dr = 8 < t_end + 6.1*width = 12.1
    with pytest.raises(ConfigError):
        S.SolverConfig(J=80, dr=0.1, dt=0.05, t_end=6.0, width=1.0)


def test_config_rejects_bad_shapes_and_flags():
    with pytest.raises(ConfigError):
        S.SolverConfig(J=3)
    with pytest.raises(ConfigError):
        S.SolverConfig(dt=-0.01)
    with pytest.raises(ConfigError):
        S.SolverConfig(t_end=1.5)
    with pytest.raises(ConfigError):
        S.SolverConfig(ablation="NullMaybe")
    with pytest.raises(ConfigError):
        S.SolverConfig(cfl_max=0.7)
    with pytest.raises(ConfigError):
        S.SolverConfig(K=1, a_coeffs=(1.0, 0.5, 0.25), t_end=4.0, J=120)
    with pytest.raises(ConfigError):
        S.SolverConfig(data_from_case=True, t_end=4.0, J=120)


def test_infinite_support_case_skips_causality_check():
    # spatially constant modes have no support radius; the clean-region
    # restriction is the test's job, not the config's
    cfg = S.case_config("kg_tower", K=1, J=40, dr=0.25, dt=0.01, t_end=12.0)
    assert cfg.J * cfg.dr < cfg.t_end
    assert math.isinf(S.data_support_radius(cfg))


def test_mismatched_case_physics_is_rejected():
    cfg = S.SolverConfig(
        K=2, J=210, dr=0.1, dt=0.05, t_end=4.0,
        forcing_case="quasi_bump", data_from_case=True,
        quasilinear_on=False, nonlinearity=ZERO,
    )
    with pytest.raises(ConfigError):
        S.run(cfg)


# ----------------------------------------------------------------------
# initial data
# ----------------------------------------------------------------------

def test_zero_amplitude_gives_zero_state():
    cfg = _linear_config(K=2, J=80, dr=0.1, dt=0.05, t_end=3.0, epsilon=0.0)
    st = S.initial_data(cfg)
    assert np.all(st.W == 0.0) and np.all(st.dW == 0.0)
    assert st.t == 2.0


def test_pure_wave_data_has_no_nonzero_modes():
    cfg = _linear_config(
        K=2, J=130, dr=0.1, dt=0.05, t_end=3.0, epsilon=0.01,
        a_coeffs=(1.0,), b_coeffs=(0.0,),
    )
    st = S.initial_data(cfg)
    assert np.all(st.W[:, 1:, :] == 0.0)
    assert np.max(np.abs(st.W[:, 0, :])) == pytest.approx(0.01)


def test_pure_mode_one_data_has_zero_mean():
    cfg = _linear_config(
        K=2, J=130, dr=0.1, dt=0.05, t_end=3.0, epsilon=0.01,
        a_coeffs=(0.0, 1.0), b_coeffs=(0.0,),
    )
    st = S.initial_data(cfg)
    assert np.all(st.W[:, 0, :] == 0.0)
    assert np.all(st.W[:, 2, :] == 0.0)
    # cos(y) splits into modes +-1, so the stored k=1 row carries 1/2
    expected = 0.5 * 0.01 * np.exp(-cfg.r ** 2)
    np.testing.assert_allclose(st.W[0, 1, :], expected, rtol=1e-13)


def test_evolved_pair_exposes_mode_fields():
    cfg = _linear_config(K=1, J=130, dr=0.1, dt=0.05, t_end=3.0, epsilon=0.01)
    st = S.initial_data(cfg)
    for tower in (st.U, st.V, st.dU, st.dV):
        assert isinstance(tower, F.ModeField)
        assert tower.K == 1 and tower.t == 2.0
    np.testing.assert_array_equal(st.U.data, st.W[0])


# ----------------------------------------------------------------------
# right-hand side
# ----------------------------------------------------------------------

def test_zero_state_has_zero_derivative():
    cfg = S.SolverConfig(K=1, J=80, dr=0.1, dt=0.05, t_end=3.0, epsilon=0.0)
    st = S.initial_data(cfg)
    dW, acc = S.rhs(st, 2.0, cfg)
    assert np.all(dW == 0.0) and np.all(acc == 0.0)


def test_klein_gordon_dispersion_relation():
    # constant-in-r mode k=2 in the linear regime: d_t(dW_2) = -4 W_2
    cfg = S.case_config("kg_tower", K=2, J=40, dr=0.25, dt=0.01, t_end=3.0)
    st = S.initial_data(cfg)
    _, acc = S.rhs(st, 2.0, cfg)
    interior = slice(0, cfg.J)  # last node sees the Dirichlet ghost
    np.testing.assert_allclose(
        acc[0, 2, interior], -4.0 * st.W[0, 2, interior], rtol=1e-12
    )


def test_rhs_raises_on_non_finite_state():
    cfg = S.SolverConfig(K=1, J=80, dr=0.1, dt=0.05, t_end=3.0, epsilon=0.0)
    st = S.initial_data(cfg)
    st.W[0, 0, 3] = math.nan
    with pytest.raises(NonFiniteError):
        S.rhs(st, 2.0, cfg)


def test_manufactured_acceleration_converges_at_second_order():
    # solver rhs + forcing vs a centered time difference of the analytic
    # fields: the mismatch is the spatial truncation error, O(dr^2)
    case = F.manufactured("quasi_bump")
    t, dt_fd = 3.0, 1e-3

    def residual(dr):
        J = int(round(16.0 / dr))
        cfg = S.case_config("quasi_bump", J=J, dr=dr, dt=0.4 * dr, t_end=4.0)
        W, dW, _ = case.fields(t, cfg.r, cfg.K)
        st = S.EvolvedPair(t=t, W=W, dW=dW, dr=dr)
        forcing = S._forcing_evaluator(cfg)
        _, acc = S.rhs(st, t, cfg, forcing)
        Wm, _, _ = case.fields(t - dt_fd, cfg.r, cfg.K)
        Wp, _, _ = case.fields(t + dt_fd, cfg.r, cfg.K)
        w_tt = (Wp - 2.0 * W + Wm) / dt_fd ** 2
        return float(np.sqrt(np.mean(np.abs(acc - w_tt) ** 2)))

    coarse, fine = residual(0.1), residual(0.05)
    assert coarse / fine == pytest.approx(4.0, abs=1.0)
    assert fine < 1e-3


# ----------------------------------------------------------------------
# stepping: exact linear oracles
# ----------------------------------------------------------------------

def test_zero_state_stays_zero_exactly():
    cfg = _linear_config(K=1, J=80, dr=0.1, dt=0.05, t_end=4.0, epsilon=0.0)
    res = S.run(cfg)
    st = res.final_state
    assert np.all(st.W == 0.0) and np.all(st.dW == 0.0)
    assert all(e == 0.0 for _, e in res.energy_series)


def test_kg_mode_returns_after_one_period():
    # W_1 = cos(t): after t = 2 + 2pi the state must return to its initial
    # value wherever the outer-boundary corruption (speed <= 1 plus a short
    # evanescent tail) has not yet arrived
    cfg = S.case_config(
        "kg_tower", K=1, J=60, dr=0.25, dt=0.01, t_end=2.0 + 2.0 * math.pi,
        snapshot_every=1000,
    )
    res = S.run(cfg)
    st = res.final_state
    Wex, dWex, _ = F.manufactured("kg_tower").fields(st.t, cfg.r, 1)
    clean = cfg.r < cfg.J * cfg.dr - (st.t - 2.0) - 3.0
    assert clean.sum() > 20
    err = np.max(np.abs(st.W[:, :, clean] - Wex[:, :, clean]))
    assert err < 1e-6


def test_pulse_travels_at_unit_speed():
    # outgoing d'Alembert solution f(t-r)/r: the peak of r*W_0 sits at
    # r = t up to O(dr)
    cfg = S.case_config(
        "wave_pulse", K=0, J=210, dr=0.1, dt=0.05, t_end=12.0,
        snapshot_every=200,
    )
    res = S.run(cfg)
    st = res.final_state
    profile = np.abs(cfg.r * np.real(st.W[0, 0]))
    r_peak = cfg.r[int(np.argmax(profile))]
    assert abs(r_peak - 12.0) <= 2 * cfg.dr


def test_step_optionally_records_into_history():
    cfg = _linear_config(K=1, J=130, dr=0.1, dt=0.05, t_end=4.0, epsilon=0.01)
    st = S.initial_data(cfg)
    hist = F.StateHistory(cfg.K, cfg.J, cfg.dr, depth=8)
    hist.push(st.t, st.W, st.dW)
    out = S.step(st, 2.0, cfg.dt, cfg)          # pure form
    assert len(hist) == 1
    S.step(st, 2.0, cfg.dt, cfg, history=hist)  # recording form
    assert len(hist) == 2
    assert out.t == pytest.approx(2.05)
    assert np.all(st.W == S.initial_data(cfg).W)  # input untouched


# ----------------------------------------------------------------------
# full runs: convergence, conservation, causality, reality
# ----------------------------------------------------------------------

def _quasi_bump_l2_error(dr):
    J = int(round(16.0 / dr))
    cfg = S.case_config(
        "quasi_bump", J=J, dr=dr, dt=0.4 * dr, t_end=4.0,
        snapshot_every=10 ** 9, history_depth=8,
    )
    st = S.run(cfg).final_state
    Wex, _, _ = F.manufactured("quasi_bump").fields(st.t, cfg.r, cfg.K)
    w = (np.arange(J + 1) * dr) ** 2 * dr
    return math.sqrt(float(np.sum(w * np.abs(st.W - Wex) ** 2)))


def test_manufactured_run_converges_at_second_order():
    coarse, fine = _quasi_bump_l2_error(0.08), _quasi_bump_l2_error(0.04)
    assert 3.5 < coarse / fine < 4.5


def test_linear_flat_energy_matches_closed_form():
    # Gaussian data e^{-r^2}(a0 + a1 cos y): every radial integral is a
    # Gamma-function value, so the discrete energy can be checked against
    # the continuum one (agreement O(dr^2))
    eps, a0, a1 = 0.01, 1.0, 0.7
    i_grad = (3.0 / 8.0) * math.sqrt(math.pi / 2.0)  # int (de^{-r^2}/dr)^2 r^2 dr
    i_val = (1.0 / 8.0) * math.sqrt(math.pi / 2.0)   # int e^{-2r^2} r^2 dr
    e0 = 2.0 * math.pi * (eps * a0) ** 2 * i_grad
    e1 = 4.0 * math.pi * (eps * a1 / 2.0) ** 2 * (i_grad + i_val)
    expected = 4.0 * math.pi * 2.0 * (e0 + e1)
    cfg = _linear_config(
        K=1, J=2000, dr=0.005, dt=0.0025, t_end=2.1, epsilon=eps,
        a_coeffs=(a0, a1),
    )
    st = S.initial_data(cfg)
    got = S.linear_flat_energy(st.W, st.dW, cfg.dr)
    assert got == pytest.approx(expected, rel=2e-4)


def test_linear_energy_drift_below_tolerance():
    cfg = _linear_config(
        K=2, J=512, dr=0.04, dt=0.002, t_end=3.0, epsilon=0.01,
        a_coeffs=(1.0, 1.0, 1.0), b_coeffs=(0.0, 0.5), snapshot_every=100,
    )
    res = S.run(cfg)
    energies = [e for _, e in res.energy_series]
    drift = abs(energies[-1] - energies[0]) / energies[0] / (res.t_final - 2.0)
    assert drift < 1e-8


def test_compact_data_respects_causality():
    cfg = S.case_config(
        "wave_pulse", K=0, J=210, dr=0.1, dt=0.05, t_end=12.0,
        snapshot_every=40,
    )
    res = S.run(cfg)
    R0 = S.data_support_radius(cfg)
    for t, W, dW in res.snapshots:
        outside = cfg.r > R0 + (t - 2.0) + cfg.dr
        if outside.any():
            assert np.max(np.abs(W[..., outside])) < 1e-12
            assert np.max(np.abs(dW[..., outside])) < 1e-12


def test_nonlinear_run_preserves_reality():
    cfg = S.SolverConfig(
        K=2, J=200, dr=0.1, dt=0.05, t_end=6.0, epsilon=0.05,
        a_coeffs=(1.0, 0.8, 0.3), b_coeffs=(0.0, 0.2), snapshot_every=80,
    )
    st = S.run(cfg).final_state
    # the zero mode of a real field is real; stored modes represent the
    # negative frequencies by conjugation, which the sample path realizes
    assert np.max(np.abs(np.imag(st.W[:, 0, :]))) == 0.0
    y = F.y_grid(32)
    samples = F.reconstruct(st.W[0, :, 50], y)
    assert np.max(np.abs(np.imag(samples))) < 1e-16


def test_run_log_and_energy_series_are_recorded():
    cfg = _linear_config(
        K=1, J=130, dr=0.1, dt=0.05, t_end=3.0, epsilon=0.01, snapshot_every=4,
    )
    res = S.run(cfg)
    assert res.status == "Completed"
    assert res.t_final == pytest.approx(3.0)
    assert [t for t, _ in res.energy_series] == pytest.approx(
        [2.0, 2.2, 2.4, 2.6, 2.8, 3.0]
    )
    for rec in res.log:
        assert set(rec) == {"t", "cfl", "max_w", "wall_per_step"}
        assert rec["cfl"] <= 0.5 * 1.01
    assert len(res.history) > 0


# ----------------------------------------------------------------------
# blow-up reporting
# ----------------------------------------------------------------------

def test_divergent_ablation_raises_blowup_with_partial_result():
    kap = 10.0
    big = tuple(tuple(kap * c for c in row) for row in S.FULL_COUPLING)
    cfg = S.SolverConfig(
        K=1, J=400, dr=0.1, dt=0.05, t_end=30.0, epsilon=0.3,
        a_coeffs=(1.0, 0.5), b_coeffs=(-0.3,), nonlinearity=(big, big),
        ablation="NullOff", quasilinear_on=False, snapshot_every=8,
    )
    with pytest.raises(BlowUpError) as info:
        S.run(cfg)
    err = info.value
    assert 2.0 < err.t < 30.0
    assert err.norm > err.ceiling or math.isinf(err.norm)
    partial = err.partial
    assert partial.status.startswith("BlowUp")
    assert len(partial.snapshots) >= 1


def test_energy_ceiling_triggers_blowup_report():
    # the manufactured forcing pumps the flat energy by about x2 by t=4,
    # so a ceiling at x1.5 must trip with a finite recorded norm
    cfg = S.case_config(
        "quasi_bump", J=200, dr=0.08, dt=0.032, t_end=4.0,
        snapshot_every=5, blowup_factor=1.5,
    )
    with pytest.raises(BlowUpError) as info:
        S.run(cfg)
    err = info.value
    assert math.isfinite(err.norm)
    assert err.norm > err.ceiling
    assert err.partial.blowup == (err.t, err.norm)
