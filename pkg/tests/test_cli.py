import csv
import json
import math

import numpy as np
import pytest

from nvorient import cli


def write_cfg(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload, indent=2))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


SIMULATE_CFG = {
    "mode": "simulate",
    "static": {"b_mt": 10.2, "theta_deg": 90.0},
    "mw": {"amplitude_mt": 0.0357, "zeta_deg": 90.0, "transverse_azimuth_deg": 45.0},
}


class TestSimulate:
    def test_csv_output_and_manifest(self, tmp_path):
        cfg = write_cfg(tmp_path, "sim.json", SIMULATE_CFG)
        out = tmp_path / "out"
        assert cli.run("simulate", cfg, out) == cli.EXIT_OK
        rows = read_csv(out / "spectrum.csv")
        assert rows[0] == ["frequency_mhz", "signal"]
        assert len(rows) == 202
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["mode"] == "simulate"
        assert manifest["outputs"] == ["spectrum.csv"]
        assert len(manifest["config_sha256"]) == 64

    def test_json_format(self, tmp_path):
        cfg = write_cfg(tmp_path, "sim.json", SIMULATE_CFG)
        out = tmp_path / "out"
        assert cli.run("simulate", cfg, out, fmt="json") == cli.EXIT_OK
        env = json.loads((out / "spectrum.json").read_text())
        assert len(env["frequencies_mhz"]) == 201

    def test_noisy_simulate_seeded(self, tmp_path):
        payload = dict(SIMULATE_CFG, noise={"rate_kcps": 100.0, "dwell_s": 0.5, "seed": 5})
        cfg = write_cfg(tmp_path, "sim.json", payload)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert cli.run("simulate", cfg, out_a) == cli.EXIT_OK
        assert cli.run("simulate", cfg, out_b) == cli.EXIT_OK
        assert (out_a / "spectrum.csv").read_bytes() == (out_b / "spectrum.csv").read_bytes()

    def test_seed_override_recorded(self, tmp_path):
        payload = dict(SIMULATE_CFG, noise={"rate_kcps": 100.0, "dwell_s": 0.5})
        cfg = write_cfg(tmp_path, "sim.json", payload)
        out = tmp_path / "out"
        assert cli.run("simulate", cfg, out, seed=99) == cli.EXIT_OK
        assert json.loads((out / "manifest.json").read_text())["seed"] == 99


class TestFit:
    def test_fit_roundtrip(self, tmp_path):
        cfg = write_cfg(tmp_path, "sim.json", SIMULATE_CFG)
        out = tmp_path / "out"
        assert cli.run("simulate", cfg, out) == cli.EXIT_OK
        fit_cfg = write_cfg(tmp_path, "fit.json", {
            "mode": "fit",
            "spectrum_csv": str(out / "spectrum.csv"),
            "init_centers_mhz": [2898.0, 2926.0],
        })
        assert cli.run("fit", fit_cfg, out) == cli.EXIT_OK
        dips = json.loads((out / "dips.json").read_text())
        assert len(dips) == 2
        assert abs(dips[0]["center_mhz"] - 2898.2) < 0.5
        assert abs(dips[1]["center_mhz"] - 2926.4) < 0.5

    def test_missing_spectrum_is_config_error(self, tmp_path):
        fit_cfg = write_cfg(tmp_path, "fit.json", {
            "mode": "fit",
            "spectrum_csv": str(tmp_path / "absent.csv"),
            "init_centers_mhz": [2898.0],
        })
        assert cli.run("fit", fit_cfg, tmp_path / "out") == cli.EXIT_CONFIG


class TestErrorPaths:
    def test_unknown_key_rejected(self, tmp_path):
        payload = dict(SIMULATE_CFG, extra=1)
        cfg = write_cfg(tmp_path, "sim.json", payload)
        assert cli.run("simulate", cfg, tmp_path / "out") == cli.EXIT_CONFIG

    def test_mode_mismatch(self, tmp_path):
        cfg = write_cfg(tmp_path, "sim.json", SIMULATE_CFG)
        assert cli.run("fit", cfg, tmp_path / "out") == cli.EXIT_CONFIG

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert cli.run("simulate", path, tmp_path / "out") == cli.EXIT_CONFIG

    def test_pipeline_error_exit_code(self, tmp_path):
        # sensor position inside the wire radius fails during the run, not
        # during config validation
        cfg = write_cfg(tmp_path, "t1.json", {
            "mode": "table1",
            "wire": {"current_ma": 40.0, "positions_um": [[2.0, 2.0]]},
        })
        assert cli.run("table1", cfg, tmp_path / "out") == cli.EXIT_PIPELINE

    def test_bad_format_rejected(self, tmp_path):
        cfg = write_cfg(tmp_path, "sim.json", SIMULATE_CFG)
        assert cli.run("simulate", cfg, tmp_path / "out", fmt="xml") == cli.EXIT_CONFIG

    def test_no_outputs_on_config_error(self, tmp_path):
        payload = dict(SIMULATE_CFG, extra=1)
        cfg = write_cfg(tmp_path, "sim.json", payload)
        out = tmp_path / "out"
        cli.run("simulate", cfg, out)
        assert not (out / "manifest.json").exists()


class TestTable1:
    def test_default_positions_and_accuracy(self, tmp_path):
        cfg = write_cfg(tmp_path, "t1.json", {
            "mode": "table1",
            "wire": {"current_ma": 40.0},
        })
        out = tmp_path / "out"
        assert cli.run("table1", cfg, out) == cli.EXIT_OK
        rows = read_csv(out / "table1.csv")
        assert rows[0] == ["x_um", "z_um", "alpha_est_deg", "alpha_theory_deg", "error_deg"]
        assert len(rows) == 10
        for row in rows[1:]:
            assert float(row[4]) < 1e-3

    def test_parallel_matches_serial(self, tmp_path):
        cfg = write_cfg(tmp_path, "t1.json", {
            "mode": "table1",
            "wire": {"current_ma": 40.0,
                     "positions_um": [[47.7, 16.5], [44.0, 25.0], [38.5, 26.7]]},
        })
        out_s, out_p = tmp_path / "serial", tmp_path / "parallel"
        assert cli.run("table1", cfg, out_s, workers=1) == cli.EXIT_OK
        assert cli.run("table1", cfg, out_p, workers=3) == cli.EXIT_OK
        assert (out_s / "table1.csv").read_bytes() == (out_p / "table1.csv").read_bytes()


class TestReconstructPlanar:
    CFG = {
        "mode": "reconstruct-planar",
        "nv_index": 3,
        "wire": {"current_ma": 40.0, "positions_um": [[61.0, 18.0]]},
        "noise": {"rate_kcps": 200.0, "dwell_s": 0.5, "seed": 7},
    }

    def test_seeded_rerun_byte_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, "rp.json", self.CFG)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert cli.run("reconstruct-planar", cfg, out_a) == cli.EXIT_OK
        assert cli.run("reconstruct-planar", cfg, out_b) == cli.EXIT_OK
        assert (out_a / "planar.csv").read_bytes() == (out_b / "planar.csv").read_bytes()

    def test_different_seed_differs(self, tmp_path):
        cfg = write_cfg(tmp_path, "rp.json", self.CFG)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert cli.run("reconstruct-planar", cfg, out_a) == cli.EXIT_OK
        assert cli.run("reconstruct-planar", cfg, out_b, seed=8) == cli.EXIT_OK
        assert (out_a / "planar.csv").read_bytes() != (out_b / "planar.csv").read_bytes()


class TestReconstruct3d:
    def test_measured_axes_bypass(self, tmp_path):
        cfg = write_cfg(tmp_path, "r3.json", {
            "mode": "reconstruct-3d",
            "nv_indices": [3, 1],
            "wire": {"current_ma": 40.0, "positions_um": [[61.0, 18.0]]},
            "measured_y_axes": [[-0.86, 0.42, -0.29], [0.85, 0.46, 0.25]],
        })
        out = tmp_path / "out"
        assert cli.run("reconstruct-3d", cfg, out) == cli.EXIT_OK
        payload = json.loads((out / "reconstruct3d.json").read_text())
        assert payload["sign_ambiguous"] is True
        assert 1.5 < payload["angular_error_deg"] < 3.5
        assert abs(np.linalg.norm(payload["axis"]) - 1.0) < 1e-9

    def test_full_chain_accuracy(self, tmp_path):
        cfg = write_cfg(tmp_path, "r3.json", {
            "mode": "reconstruct-3d",
            "nv_indices": [3, 1],
            "wire": {"current_ma": 40.0, "positions_um": [[61.0, 18.0]]},
        })
        out = tmp_path / "out"
        assert cli.run("reconstruct-3d", cfg, out) == cli.EXIT_OK
        payload = json.loads((out / "reconstruct3d.json").read_text())
        assert payload["angular_error_deg"] < 1e-3


class TestFieldmapAndSensitivity:
    def test_fieldmap_values(self, tmp_path):
        cfg = write_cfg(tmp_path, "fm.json", {
            "mode": "fieldmap",
            "grid_um": {"x": [61.0, 61.0, 1.0], "z": [18.0, 18.0, 1.0]},
        })
        out = tmp_path / "out"
        assert cli.run("fieldmap", cfg, out) == cli.EXIT_OK
        rows = read_csv(out / "fieldmap.csv")
        assert rows[0] == ["x_um", "z_um", "mx", "mz"]
        x, z, mx, mz = (float(v) for v in rows[1])
        r = math.hypot(61.0, 18.0)
        assert abs(mx - 18.0 / r) < 1e-9
        assert abs(mz + 61.0 / r) < 1e-9

    def test_sensitivity_report(self, tmp_path):
        cfg = write_cfg(tmp_path, "sens.json", {
            "mode": "sensitivity",
            "phi_deg": 45.0,
            "rate_kcps": 200.0,
            "contrast": 0.30,
            "time_s": 1.0,
        })
        out = tmp_path / "out"
        assert cli.run("sensitivity", cfg, out) == cli.EXIT_OK
        rows = read_csv(out / "sensitivity.csv")
        eta = float(rows[1][2])
        eta_max = float(rows[1][3])
        assert abs(eta - 2.64e-3) < 0.01e-3
        assert abs(eta - eta_max) < 1e-12


class TestMain:
    def test_argv_round_trip(self, tmp_path):
        cfg = write_cfg(tmp_path, "sim.json", SIMULATE_CFG)
        out = tmp_path / "out"
        code = cli.main(["simulate", "--config", str(cfg), "--out", str(out),
                         "--format", "json"])
        assert code == cli.EXIT_OK
        assert (out / "spectrum.json").exists()

    def test_missing_required_flag(self):
        with pytest.raises(SystemExit):
            cli.main(["simulate", "--config", "x.json"])
