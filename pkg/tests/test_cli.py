"""Config parsing, artifact round-trips, exit codes, and verify suites.

The CLI is exercised in-process through ``main(argv)`` so exit codes and
artifacts can be asserted directly; determinism is checked byte-for-byte
on the energy CSV of two identical invocations.
"""

import hashlib
import json
import math

import numpy as np
import pytest

from kkwave.cli import main, parse_config
from kkwave.errors import ConfigParseError, DomainError
from kkwave.fields import read_snapshot, write_snapshot
from kkwave.solver import FULL_COUPLING, ZERO_COUPLING

SMALL_CFG = """\
# small quasilinear run
K = 1
J = 104
dr = 0.1
dt = 0.05
t_end = 4.0
epsilon = 0.001
a_coeffs = 1.0, 0.5
history_depth = none
"""

BLOWUP_CFG = """\
K = 1
J = 104
dr = 0.1
dt = 0.05
t_end = 4.0
epsilon = 5.0
a_coeffs = 1.0, 0.5
quasilinear_on = false
ablation = NullOff
"""


@pytest.fixture()
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_CFG)
    return path


# ======================================================================
# config parsing
# ======================================================================

class TestParseConfig:
    def test_minimal_file_fills_defaults(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("K = 3\n")
        cfg = parse_config(path, env={})
        assert cfg.K == 3
        assert cfg.dr == 0.1 and cfg.epsilon == 0.01  # documented defaults
        assert cfg.nonlinearity == (FULL_COUPLING, FULL_COUPLING)

    def test_every_field_kind_parses(self, small_cfg, tmp_path):
        cfg = parse_config(small_cfg, env={})
        assert cfg.a_coeffs == (1.0, 0.5)
        assert cfg.history_depth is None
        path = tmp_path / "full.cfg"
        path.write_text(
            "nonlinearity = zero\nquasilinear_on = no\n"
            "forcing_case = none\nablation = NullOff\nhistory_depth = 4\n"
        )
        cfg = parse_config(path, env={})
        assert cfg.nonlinearity == (ZERO_COUPLING, ZERO_COUPLING)
        assert cfg.quasilinear_on is False
        assert cfg.forcing_case is None
        assert cfg.ablation == "NullOff"
        assert cfg.history_depth == 4

    def test_eight_float_nonlinearity(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("nonlinearity = 1, 0.5, 0.5, 1, 0, 1, 1, 0\n")
        cfg = parse_config(path, env={})
        assert cfg.nonlinearity == (((1.0, 0.5), (0.5, 1.0)),
                                    ((0.0, 1.0), (1.0, 0.0)))

    def test_malformed_line_named(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("K = 1\ndr 0.1\n")
        with pytest.raises(ConfigParseError) as exc:
            parse_config(path, env={})
        assert ":2:" in str(exc.value)

    def test_unknown_key_named(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("K = 1\nchunkiness = 9\n")
        with pytest.raises(ConfigParseError) as exc:
            parse_config(path, env={})
        assert "chunkiness" in str(exc.value) and ":2:" in str(exc.value)

    def test_bad_value_named(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("epsilon = tiny\n")
        with pytest.raises(ConfigParseError) as exc:
            parse_config(path, env={})
        assert "epsilon" in str(exc.value)

    def test_env_override_wins(self, small_cfg):
        cfg = parse_config(small_cfg, env={"KKWAVE_EPSILON": "0.5"})
        assert cfg.epsilon == 0.5

    def test_bad_env_value_names_variable(self, small_cfg):
        with pytest.raises(ConfigParseError) as exc:
            parse_config(small_cfg, env={"KKWAVE_J": "many"})
        assert "KKWAVE_J" in str(exc.value)


# ======================================================================
# snapshot round-trip
# ======================================================================

class TestSnapshotFormat:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        shape = (2, 3, 41)
        W = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        dW = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        path = tmp_path / "snap.bin"
        write_snapshot(path, W, dW, 2, 0.05, 3.25)
        W2, dW2, K, dr, t = read_snapshot(path)
        assert K == 2 and dr == 0.05 and t == 3.25
        assert np.array_equal(W, W2) and np.array_equal(dW, dW2)

    def test_foreign_file_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a snapshot at all")
        with pytest.raises(DomainError):
            read_snapshot(path)


# ======================================================================
# run command and artifacts
# ======================================================================

class TestCmdRun:
    def test_completed_run_writes_manifest(self, small_cfg, tmp_path):
        out = tmp_path / "out"
        assert main(["run", "--config", str(small_cfg),
                     "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "Completed"
        assert manifest["t_final"] == 4.0
        assert manifest["config"]["epsilon"] == 0.001
        assert len(manifest["files"]) >= 3
        for name, digest in manifest["files"].items():
            blob = (out / name).read_bytes()
            assert hashlib.sha256(blob).hexdigest() == digest, name

    def test_energy_csv_layout(self, small_cfg, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", str(small_cfg), "--out", str(out)])
        lines = (out / "energy.csv").read_text().splitlines()
        assert lines[0] == "leaf,functional,n,k,value"
        kinds = [line.split(",")[1] for line in lines[1:]]
        # flat series first, then the hyperboloid block, stable order
        n_flat = kinds.count("flat")
        assert n_flat >= 2 and set(kinds[:n_flat]) == {"flat"}
        assert "interior-zero" in kinds and "interior-higher" in kinds
        for line in lines[1:]:
            leaf, _, n, k, value = line.split(",")
            float(leaf), int(n), int(k), float(value)

    def test_run_log_is_json_lines(self, small_cfg, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", str(small_cfg), "--out", str(out)])
        for line in (out / "run.log").read_text().splitlines():
            entry = json.loads(line)
            assert {"t", "cfl", "max_w", "wall_per_step"} <= entry.keys()

    def test_identical_invocations_byte_identical_csv(self, small_cfg,
                                                      tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["run", "--config", str(small_cfg), "--out", str(out_a)])
        main(["run", "--config", str(small_cfg), "--out", str(out_b)])
        assert (out_a / "energy.csv").read_bytes() == \
            (out_b / "energy.csv").read_bytes()

    def test_blowup_recorded_in_manifest(self, tmp_path):
        cfg = tmp_path / "blow.cfg"
        cfg.write_text(BLOWUP_CFG)
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"].startswith("BlowUp(t=")
        assert manifest["t_final"] < 4.0

    def test_malformed_config_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("dr 0.1\n")
        assert main(["run", "--config", str(cfg),
                     "--out", str(tmp_path / "o")]) == 2
        assert ":1:" in capsys.readouterr().err

    def test_unwritable_out_dir_exits_3(self, small_cfg, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("a file, not a directory")
        assert main(["run", "--config", str(small_cfg),
                     "--out", str(blocker / "sub")]) == 3

    def test_missing_subcommand_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2


# ======================================================================
# fit command
# ======================================================================

@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    cfg = tmp_path_factory.mktemp("cfg") / "small.cfg"
    cfg.write_text(SMALL_CFG)
    out = tmp_path_factory.mktemp("artifacts")
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    return out


class TestCmdFit:
    def test_fit_prints_and_appends(self, run_dir, capsys):
        assert main(["fit", "--run-dir", str(run_dir),
                     "--quantity", "l2y-tilde"]) == 0
        assert "exponent" in capsys.readouterr().out
        assert main(["fit", "--run-dir", str(run_dir),
                     "--quantity", "grad-w0"]) == 0
        lines = (run_dir / "fits.csv").read_text().splitlines()
        assert lines[0].startswith("quantity,t_lo,t_hi,exponent")
        assert len(lines) == 3  # header + two appended rows
        assert lines[1].split(",")[0] == "l2y-tilde"

    def test_unknown_quantity_exits_2_listing_ids(self, run_dir, capsys):
        assert main(["fit", "--run-dir", str(run_dir),
                     "--quantity", "bogus"]) == 2
        err = capsys.readouterr().err
        assert "l2y-tilde" in err and "boost-w0" in err

    def test_window_outside_run_exits_2(self, run_dir):
        assert main(["fit", "--run-dir", str(run_dir),
                     "--quantity", "l2y-tilde", "--window", "100:500"]) == 2

    def test_missing_artifacts_exits_3(self, tmp_path, capsys):
        empty = tmp_path / "nothing"
        empty.mkdir()
        assert main(["fit", "--run-dir", str(empty),
                     "--quantity", "l2y-tilde"]) == 3
        assert "manifest" in capsys.readouterr().err


# ======================================================================
# verify suites
# ======================================================================

class TestCmdVerify:
    def test_algebra_suite_passes(self, capsys):
        assert main(["verify", "--suite", "algebra"]) == 0
        records = [json.loads(line)
                   for line in capsys.readouterr().out.splitlines()]
        assert len(records) == 63  # 42 commutators + 7 scalings + 14 reps
        assert all(rec["pass"] for rec in records)
        assert sum(rec["check"].startswith("commute-")
                   for rec in records) == 42

    def test_algebra_suite_catches_planted_fault(self, capsys):
        assert main(["verify", "--suite", "algebra", "--inject-fault"]) == 1
        records = [json.loads(line)
                   for line in capsys.readouterr().out.splitlines()]
        assert any(not rec["pass"] for rec in records)

    def test_inequalities_suite_passes(self, capsys):
        assert main(["verify", "--suite", "inequalities"]) == 0
        records = [json.loads(line)
                   for line in capsys.readouterr().out.splitlines()]
        assert len(records) == 24
        for rec in records:
            assert rec["pass"]
            assert {"lhs", "rhs", "ratio", "c_star"} <= rec.keys()
            assert rec["ratio"] <= rec["c_star"]

    def test_convergence_suite_reports_second_order(self, capsys):
        assert main(["verify", "--suite", "convergence"]) == 0
        records = [json.loads(line)
                   for line in capsys.readouterr().out.splitlines()]
        assert len(records) == 2
        for rec in records:
            assert 1.8 < rec["order"] < 2.2  # measured 2.000 / 2.002


# ======================================================================
# ablate command
# ======================================================================

class TestCmdAblate:
    def test_paired_comparison_report(self, small_cfg, tmp_path, capsys):
        out = tmp_path / "abl"
        assert main(["ablate", "--config", str(small_cfg),
                     "--out", str(out)]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["status_on"] == "Completed"
        assert record["status_off"] == "Completed"
        assert record["ordering_ok"] is True
        on_disk = json.loads((out / "ablation.json").read_text())
        assert on_disk == record
