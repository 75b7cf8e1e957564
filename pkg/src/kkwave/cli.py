"""Command-line entry point: run, verify, fit, ablate.

Subcommands
-----------
run      evolve one configuration and write the artifact set
verify   self-contained check suites: algebra | inequalities | convergence
fit      decay-rate fit over a completed run directory
ablate   paired NullOn/NullOff runs compared through the ablation report

Config file format (``--config``): flat ``key = value`` lines, ``#``
comments and blank lines ignored, one key per line.  Keys are the
evolution-config fields with these defaults:

    K = 2                   highest retained circle mode
    J = 160                 radial cells (grid reaches r = J*dr)
    dr = 0.1                radial spacing
    dt = 0.05               time step (dt <= cfl_max * dr)
    t_end = 6.0             final time (data posed at t = 2)
    epsilon = 0.01          data amplitude
    alpha = 0.25            exterior foliation parameter
    width = 1.0             data Gaussian width
    a_coeffs = 1.0, 1.0     per-mode data amplitudes (comma separated)
    b_coeffs = 0.0          velocity-profile coefficients
    nonlinearity = full     'full' | 'zero' | eight comma floats
                            (first matrix rows, then second matrix rows)
    quasilinear_on = true   keep the u * d_y^2 coefficient
    ablation = NullOn       'NullOn' | 'NullOff' (sign of the d_r x d_r part)
    forcing_case = none     manufactured-case id or 'none'
    data_from_case = false  take initial data from the forcing case
    snapshot_every = 8      record cadence in steps
    history_depth = 8       buffered levels; 'none' keeps the whole run
    blowup_factor = 1e3     flat-energy ceiling multiplier
    cfl_max = 0.5           CFL guard

Every key can be overridden by an environment variable ``KKWAVE_<KEY>``
(upper case), applied after the file is read.

Run artifacts (``--out``): ``snapshot_NNNN.bin`` (binary mode arrays, see
the field-layer layout), ``energy.csv`` (columns ``leaf, functional, n, k,
value``; flat-slice series first, then hyperboloid energies when the full
history is kept; full-precision decimals, no wall-clock data, stable
ordering), ``run.log`` (JSON lines: t, cfl, max_w, wall_per_step), and
``manifest.json`` (config echo, code version, wall times, termination
status ``Completed`` | ``BlowUp(t=..)`` | ``Error``, and a sha256 checksum
for every other emitted file).

Exit codes: 0 success, 1 check failure, 2 usage or config-parse error,
3 runtime failure (I/O, missing artifacts, propagated solver errors).
"""

import argparse
import hashlib
import json
import math
import os
import pathlib
import sys
from dataclasses import asdict, fields as dataclass_fields
from datetime import datetime, timezone
from types import SimpleNamespace

import numpy as np

from . import __version__
from . import nullforms as nf
from .analysis import (
    _ks_history_from_trial,
    ablation_compare,
    check_hardy,
    check_klainerman_sobolev,
    check_weighted_sobolev,
    fit_decay,
    trial_family,
)
from ._poly import Poly
from .energies import energy_interior, higher_order_energy
from .errors import (
    BlowUpError,
    ConfigParseError,
    KKWaveError,
    MissingArtifactsError,
    UnknownQuantityError,
    WindowTooShortError,
)
from .fields import ScalarRadialHistory, manufactured, read_snapshot, write_snapshot
from .geometry import VectorFieldId
from .solver import FULL_COUPLING, ZERO_COUPLING, SolverConfig, case_config, run


# ======================================================================
# config file parsing
# ======================================================================

_CONFIG_FIELDS = {f.name for f in dataclass_fields(SolverConfig)}
_INT_FIELDS = {"K", "J", "snapshot_every"}
_FLOAT_FIELDS = {"dr", "dt", "t_end", "epsilon", "alpha", "width",
                 "blowup_factor", "cfl_max"}
_BOOL_FIELDS = {"quasilinear_on", "data_from_case"}
_TUPLE_FIELDS = {"a_coeffs", "b_coeffs"}
_NONE_WORDS = {"none", "null", ""}


def _coerce(key, text):
    """Parse one config value; raises ValueError with a reason."""
    text = text.strip()
    if key in _INT_FIELDS:
        return int(text)
    if key in _FLOAT_FIELDS:
        return float(text)
    if key in _BOOL_FIELDS:
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if key in _TUPLE_FIELDS:
        return tuple(float(p) for p in text.split(","))
    if key == "nonlinearity":
        low = text.lower()
        if low == "full":
            return (FULL_COUPLING, FULL_COUPLING)
        if low == "zero":
            return (ZERO_COUPLING, ZERO_COUPLING)
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 8:
            raise ValueError("expected 'full', 'zero', or eight comma floats")
        a, b = parts[:4], parts[4:]
        return (((a[0], a[1]), (a[2], a[3])), ((b[0], b[1]), (b[2], b[3])))
    if key == "history_depth":
        return None if text.lower() in _NONE_WORDS else int(text)
    if key == "forcing_case":
        return None if text.lower() in _NONE_WORDS else text
    if key == "ablation":
        return text
    raise ValueError(f"unknown key {key!r}")


def parse_config(path, env=None):
    """Read a flat key = value config file into an evolution config.

    Unknown keys, missing '=', and unparsable values raise ConfigParseError
    naming the offending line; KKWAVE_* environment variables override file
    values after parsing.
    """
    values = {}
    try:
        lines = pathlib.Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigParseError(f"{path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigParseError(f"{path}:{lineno}: expected 'key = value', "
                                   f"got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_FIELDS:
            raise ConfigParseError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, value)
        except ValueError as exc:
            raise ConfigParseError(f"{path}:{lineno}: bad value for "
                                   f"{key!r}: {exc}") from exc
    env = os.environ if env is None else env
    for key in _CONFIG_FIELDS:
        var = f"KKWAVE_{key.upper()}"
        if var in env:
            try:
                values[key] = _coerce(key, env[var])
            except ValueError as exc:
                raise ConfigParseError(f"{var}: bad value: {exc}") from exc
    return SolverConfig(**values)


# ======================================================================
# run artifacts
# ======================================================================

def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _leaf_ladder(result):
    """Hyperboloid parameters covered by the run: geometric ladder from
    s = 2, step sqrt(2), clipped to leaves whose interior branch fits the
    buffered history (at most 8 values)."""
    dr = result.config.dr
    span = 2.0 * (result.t_final - 2.0 * dr) - 1.0
    if span < 4.0:
        return []
    s_max = math.sqrt(span)
    ladder = []
    s = 2.0
    while s <= s_max + 1e-12 and len(ladder) < 8:
        ladder.append(s)
        s *= math.sqrt(2.0)
    return ladder


def _energy_rows(result):
    """CSV rows (leaf, functional, n, k, value), deterministic ordering:
    the flat time series first, then interior leaf energies in (s, id, k)
    order when the whole history was kept."""
    rows = [(t, "flat", 0, 0, e) for t, e in result.energy_series]
    if result.config.history_depth is None:
        hist = result.history
        for s in _leaf_ladder(result):
            rows.append((s, "interior-zero", 0, 0,
                         energy_interior(hist, s, component="zero").value))
            rows.append((s, "interior-full", 0, 0,
                         energy_interior(hist, s, component="both").value))
            for k in range(3):
                rows.append((s, "interior-higher", 2, k,
                             higher_order_energy(hist, s, 2, k).value))
    return rows


def _write_run_artifacts(result, out_dir):
    """Write snapshots, energy.csv, run.log; returns {name: sha256}."""
    checksums = {}

    for idx, (t, W, dW) in enumerate(result.snapshots):
        name = f"snapshot_{idx:04d}.bin"
        write_snapshot(out_dir / name, W, dW, result.config.K,
                       result.config.dr, t)
        checksums[name] = _sha256(out_dir / name)

    csv_path = out_dir / "energy.csv"
    with open(csv_path, "w") as fh:
        fh.write("leaf,functional,n,k,value\n")
        for leaf, functional, n, k, value in _energy_rows(result):
            fh.write(f"{leaf:.17g},{functional},{n},{k},{value:.17g}\n")
    checksums["energy.csv"] = _sha256(csv_path)

    log_path = out_dir / "run.log"
    with open(log_path, "w") as fh:
        for entry in result.log:
            fh.write(json.dumps(entry) + "\n")
    checksums["run.log"] = _sha256(log_path)
    return checksums


def _write_manifest(out_dir, status, t_final, config, checksums,
                    started, finished):
    manifest = {
        "code_version": __version__,
        "status": status,
        "t_final": t_final,
        "started": started,
        "finished": finished,
        "config": asdict(config),
        "files": checksums,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def cmd_run(args):
    config = parse_config(args.config)
    out_dir = pathlib.Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()

    try:
        result = run(config)
    except BlowUpError as err:
        result = err.partial
    except KKWaveError as err:
        finished = datetime.now(timezone.utc).isoformat()
        _write_manifest(out_dir, "Error", None, config, {}, started, finished)
        print(f"error: {err}", file=sys.stderr)
        return 3

    checksums = _write_run_artifacts(result, out_dir)
    finished = datetime.now(timezone.utc).isoformat()
    _write_manifest(out_dir, result.status, result.t_final, config,
                    checksums, started, finished)
    print(f"status {result.status}  t_final {result.t_final:g}  "
          f"{len(checksums) + 1} files in {out_dir}")
    return 0


# ======================================================================
# verify suites
# ======================================================================

def _report(record):
    print(json.dumps(record))
    return bool(record["pass"])


def _trial_poly(seed, degree=3):
    import itertools

    rng = np.random.default_rng(seed)
    coef = {}
    for ex in itertools.product(range(degree + 1), repeat=4):
        if sum(ex) <= degree:
            coef[ex] = round(float(rng.uniform(-2, 2)), 3)
    return Poly(4, coef)


def _suite_algebra(inject_fault=False):
    """Commutator and scaling identities on random cubic trial fields plus
    the cone-adapted representation checks; all residuals are pure rounding
    when the tables are right."""
    ok = True
    trials = (_trial_poly(11), _trial_poly(12))
    grid = tuple(np.meshgrid(*(np.linspace(-1.4, 1.5, 5) for _ in range(4))))

    for Z in nf.ALL_GENERATORS:
        for Q in nf.ALL_NULL_FORMS:
            residual = nf.verify_commutator(Z, Q, trials, grid,
                                            flip_correction=inject_fault)
            ok &= _report({"check": f"commute-{Z.label}-{Q.label}",
                           "residual": residual, "tol": 1e-12,
                           "pass": residual < 1e-12})
    for Q in nf.ALL_NULL_FORMS:
        phi, psi = trials
        lhs = nf.apply_generator(VectorFieldId.SCALING, nf.null_form_poly(Q, phi, psi))
        rhs = Poly.zero(4)
        for coeff, form, w1, w2 in nf.scaling_expansion(Q).terms:
            f1, f2 = phi, psi
            for g in w1:
                f1 = nf.apply_generator(g, f1)
            for g in w2:
                f2 = nf.apply_generator(g, f2)
            rhs = rhs + coeff * nf.null_form_poly(form, f1, f2)
        residual = float(np.max(np.abs(np.asarray((lhs - rhs).eval(grid)))))
        ok &= _report({"check": f"scaling-{Q.label}", "residual": residual,
                       "tol": 1e-12, "pass": residual < 1e-12})

    # representation split vs direct null form on phi(t, r) = t
    hist = ScalarRadialHistory.from_function(
        lambda t, r: t * np.ones_like(r), t0=3.0, dt=0.1, n_levels=12,
        dr=0.1, J=60,
    )
    direct = nf.eval_null_form(nf.Q0, (1, 0, 0, 0, 0), (1, 0, 0, 0, 0))
    for name, evaluator in (("boost", nf.eval_rep_boost),
                            ("tangential", nf.eval_rep_tangential)):
        for Q in nf.ALL_NULL_FORMS:
            value = evaluator(Q, hist, hist, (4.0, 1.0))
            target = direct if Q is nf.Q0 else 0.0
            residual = abs(value - target)
            ok &= _report({"check": f"rep-{name}-{Q.label}",
                           "residual": residual, "tol": 1e-10,
                           "pass": residual < 1e-10})
    return 0 if ok else 1


def _suite_inequalities():
    """Frozen-family regression run of the three inequality checkers,
    line-delimited {check, lhs, rhs, ratio, c_star, pass} records."""
    ok = True
    family = trial_family()
    for trial in family:
        check = check_weighted_sobolev(trial, 0.0)
        ok &= _report({"check": f"weighted-sobolev/{trial.id}",
                       "lhs": check.lhs, "rhs": check.rhs,
                       "ratio": check.ratio, "c_star": check.c_star,
                       "pass": check.passed})
    for trial in family:
        if not trial.compact:
            continue
        check = check_hardy(trial, 0.0)
        ok &= _report({"check": f"hardy/{trial.id}", "lhs": check.lhs,
                       "rhs": check.rhs, "ratio": check.ratio,
                       "c_star": check.c_star, "pass": check.passed})
    for trial in family:
        if not trial.cone_smooth:
            continue
        check = check_klainerman_sobolev(_ks_history_from_trial(trial), 5.0)
        ok &= _report({"check": f"klainerman-sobolev/{trial.id}",
                       "lhs": check.lhs, "rhs": check.rhs,
                       "ratio": check.ratio, "c_star": check.c_star,
                       "pass": check.passed})
    return 0 if ok else 1


def _manufactured_l2_error(case_id, dr, t_end=4.0):
    case = manufactured(case_id)
    j_cells = int(math.ceil((t_end + case.support_radius + 0.2) / dr))
    cfg = case_config(case_id, J=j_cells, dr=dr, dt=0.4 * dr, t_end=t_end,
                      snapshot_every=10 ** 9, history_depth=8)
    state = run(cfg).final_state
    w_exact, _, _ = case.fields(state.t, cfg.r, cfg.K)
    weights = (np.arange(j_cells + 1) * dr) ** 2 * dr
    return math.sqrt(float(np.sum(weights * np.abs(state.W - w_exact) ** 2)))


def _suite_convergence():
    """Manufactured-solution runs at paired resolutions; halving dr must
    shrink the final-time L2 error by ~4 (second order in space and time)."""
    ok = True
    for case_id, (coarse_dr, fine_dr) in (("wave_pulse", (0.2, 0.1)),
                                          ("quasi_bump", (0.16, 0.08))):
        coarse = _manufactured_l2_error(case_id, coarse_dr)
        fine = _manufactured_l2_error(case_id, fine_dr)
        ratio = coarse / fine
        order = math.log2(ratio)
        ok &= _report({"check": f"convergence-{case_id}",
                       "coarse": coarse, "fine": fine, "ratio": ratio,
                       "order": order, "pass": 3.5 < ratio < 4.5})
    return 0 if ok else 1


def cmd_verify(args):
    if args.suite == "algebra":
        return _suite_algebra(inject_fault=args.inject_fault)
    if args.suite == "inequalities":
        return _suite_inequalities()
    return _suite_convergence()


# ======================================================================
# fit
# ======================================================================

def _load_run_dir(run_dir):
    run_dir = pathlib.Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise MissingArtifactsError(f"{run_dir}: no manifest.json")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    snap_paths = sorted(run_dir.glob("snapshot_*.bin"))
    if not snap_paths:
        raise MissingArtifactsError(f"{run_dir}: no snapshot files")
    snapshots = []
    for path in snap_paths:
        W, dW, _, _, t = read_snapshot(path)
        snapshots.append((t, W, dW))
    snapshots.sort(key=lambda item: item[0])
    return SimpleNamespace(
        snapshots=snapshots,
        t_final=manifest["t_final"],
        config=SimpleNamespace(dr=manifest["config"]["dr"]),
    ), manifest


def _parse_window(text):
    try:
        lo, _, hi = text.partition(":")
        return float(lo), float(hi)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"window must be LO:HI, got {text!r}") from exc


def cmd_fit(args):
    run_obj, _ = _load_run_dir(args.run_dir)
    fit = fit_decay(run_obj, args.quantity, window=args.window)
    print(f"quantity {fit.quantity}  window [{fit.t_lo:g}, {fit.t_hi:g}]  "
          f"exponent {fit.exponent:.6g}  amplitude {fit.amplitude:.6g}  "
          f"residual {fit.residual:.3g}  n {fit.n_samples}"
          f"{'  DEGENERATE' if fit.degenerate else ''}")
    csv_path = pathlib.Path(args.run_dir) / "fits.csv"
    fresh = not csv_path.exists()
    with open(csv_path, "a") as fh:
        if fresh:
            fh.write("quantity,t_lo,t_hi,exponent,amplitude,residual,"
                     "n_samples,degenerate\n")
        fh.write(f"{fit.quantity},{fit.t_lo:.17g},{fit.t_hi:.17g},"
                 f"{fit.exponent:.17g},{fit.amplitude:.17g},"
                 f"{fit.residual:.17g},{fit.n_samples},{fit.degenerate}\n")
    return 0


# ======================================================================
# ablate
# ======================================================================

def cmd_ablate(args):
    base = parse_config(args.config)
    results = {}
    for role in ("NullOn", "NullOff"):
        cfg = SolverConfig(**{**asdict(base), "ablation": role})
        try:
            results[role] = run(cfg)
        except BlowUpError as err:
            results[role] = err.partial
    report = ablation_compare(results["NullOn"], results["NullOff"])
    record = {
        "epsilon": report.epsilon,
        "status_on": report.status_on,
        "status_off": report.status_off,
        "s_end_on": report.s_end_on,
        "s_end_off": report.s_end_off,
        "ratio_on": report.ratio_on,
        "ratio_off": report.ratio_off,
        "blowup_on": report.blowup_on,
        "blowup_off": report.blowup_off,
        "bitwise_identical": report.bitwise_identical,
        "ordering_ok": report.ordering_ok,
    }
    print(json.dumps(record))
    if args.out is not None:
        out_dir = pathlib.Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "ablation.json", "w") as fh:
            json.dump(record, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


# ======================================================================
# entry point
# ======================================================================

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="kkwave",
        description="Quasilinear wave simulator and diagnostics suite.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="evolve one configuration")
    p_run.add_argument("--config", required=True, help="config file path")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="self-contained check suites")
    p_verify.add_argument("--suite", required=True,
                          choices=("algebra", "inequalities", "convergence"))
    p_verify.add_argument("--inject-fault", action="store_true",
                          help="flip the commutator correction signs; the "
                               "algebra suite must then fail (self-test)")
    p_verify.set_defaults(func=cmd_verify)

    p_fit = sub.add_parser("fit", help="decay-rate fit over a run directory")
    p_fit.add_argument("--run-dir", required=True, dest="run_dir")
    p_fit.add_argument("--quantity", required=True, dest="quantity")
    p_fit.add_argument("--window", type=_parse_window, default=None,
                       help="LO:HI (default: [t_final/4, t_final])")
    p_fit.set_defaults(func=cmd_fit)

    p_ablate = sub.add_parser("ablate",
                              help="paired NullOn/NullOff comparison")
    p_ablate.add_argument("--config", required=True, help="base config file")
    p_ablate.add_argument("--out", default=None,
                          help="optional directory for ablation.json")
    p_ablate.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigParseError, UnknownQuantityError,
            WindowTooShortError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (MissingArtifactsError, OSError, KKWaveError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
