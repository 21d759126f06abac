"""Config parsing, CSV/manifest plumbing, and the command-line surface."""

import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaodecay.cli import main
from chaodecay.config import parse_config
from chaodecay.errors import (
    InputOutputError,
    SyntaxUsageError,
    ValidationError,
)
from chaodecay.formulas import SemiclassicalParams
from chaodecay.io import (
    atomic_write_text,
    check_manifest_derived,
    format_float,
    read_csv,
    read_manifest,
    write_csv,
    write_manifest,
)
from chaodecay.report import compare_report


MINIMAL_FIG3 = json.dumps({
    "command": "fig3",
    "params": {"tauD_over_TH": 0.3, "taud_over_TH": [0.05, 0.1, "inf"]},
})


class TestParseConfig:
    def test_minimal_fig3(self):
        cfg = parse_config(MINIMAL_FIG3)
        assert cfg.command == "fig3"
        assert cfg.params["tauD_over_TH"] == 0.3
        assert cfg.params["taud_over_TH"] == [0.05, 0.1, math.inf]
        assert cfg.params["n_points"] == 301  # documented default

    def test_bad_json_reports_position(self):
        with pytest.raises(SyntaxUsageError, match="line 1"):
            parse_config("{oops")

    def test_non_object_root(self):
        # well-formed JSON of the wrong shape is a validation problem
        with pytest.raises(ValidationError):
            parse_config("[1, 2]")

    def test_unknown_key_path(self):
        doc = json.loads(MINIMAL_FIG3)
        doc["params"]["tau_dd"] = 1.0
        with pytest.raises(ValidationError, match=r"config\.params\.tau_dd"):
            parse_config(json.dumps(doc))

    def test_missing_seed_field_path(self):
        doc = {"command": "simulate", "geometry": {"shape": "cardioid"},
               "ensemble": {"n_samples": 10}}
        with pytest.raises(ValidationError, match=r"config\.ensemble\.seed"):
            parse_config(json.dumps(doc))

    def test_unknown_command(self):
        with pytest.raises(ValidationError, match="config.command"):
            parse_config(json.dumps({"command": "transmogrify"}))

    def test_bool_is_not_a_number(self):
        doc = json.loads(MINIMAL_FIG3)
        doc["params"]["tauD_over_TH"] = True
        with pytest.raises(ValidationError):
            parse_config(json.dumps(doc))

    def test_bath_block_maps_to_alpha(self):
        doc = {"command": "pair-decoherence",
               "geometry": {"shape": "cardioid"},
               "ensemble": {"seed": 1, "n_samples": 4},
               "params": {"bath": {"damping": 0.5, "inverse_temperature": 1.0}}}
        cfg = parse_config(json.dumps(doc))
        assert cfg.params["alpha"] == pytest.approx(1.0)
        assert cfg.warnings == []

    def test_bath_and_alpha_conflict_warns(self):
        doc = {"command": "pair-decoherence",
               "geometry": {"shape": "cardioid"},
               "ensemble": {"seed": 1, "n_samples": 4},
               "params": {"alpha": 0.123,
                          "bath": {"damping": 0.5, "inverse_temperature": 1.0}}}
        cfg = parse_config(json.dumps(doc))
        assert cfg.params["alpha"] == 0.123  # the direct value wins
        assert len(cfg.warnings) == 1
        assert "alpha" in cfg.warnings[0]

    def test_geometry_defaults(self):
        doc = {"command": "simulate", "geometry": {"shape": "cardioid"},
               "ensemble": {"seed": 3}}
        cfg = parse_config(json.dumps(doc))
        assert cfg.geometry.scale == 1.0
        assert cfg.geometry.opening_length == 0.1
        assert cfg.geometry.opening_center == pytest.approx(2.0 * math.sqrt(2.0))

    def test_correction_requires_core_times(self):
        doc = {"command": "correction", "params": {"tau_d": 0.1}}
        with pytest.raises(ValidationError, match="dwell_time"):
            parse_config(json.dumps(doc))

    def test_bad_regime(self):
        doc = {"command": "correction",
               "params": {"dwell_time": 0.3, "heisenberg_time": 1.0,
                          "regime": "superfast"}}
        with pytest.raises(ValidationError, match="regime"):
            parse_config(json.dumps(doc))

    def test_resolved_contains_defaults(self):
        cfg = parse_config(MINIMAL_FIG3)
        assert cfg.resolved["params"]["t_max_over_TH"] == 3.0
        assert cfg.resolved["output"] == "out-fig3"  # per-command default dir


class TestFormatFloat:
    @given(st.floats(allow_nan=False, allow_infinity=False))
    @settings(max_examples=300, deadline=None)
    def test_round_trip(self, x):
        assert float(format_float(x)) == x

    def test_infinities(self):
        assert format_float(math.inf) == "inf"
        assert format_float(-math.inf) == "-inf"

    def test_numpy_scalars(self):
        assert float(format_float(np.float64(0.1))) == 0.1
        assert format_float(np.int64(3)) == "3"


class TestCsvManifest:
    def test_csv_round_trip(self, tmp_path):
        path = str(tmp_path / "x.csv")
        line = {"seed": 7, "geometry": {"shape": "circle"}}
        rows = [(0.0, 1.0), (0.5, 0.25), (math.inf, 1e-300)]
        write_csv(path, ["a", "b"], rows, manifest_line=line)
        manifest, header, data = read_csv(path)
        assert manifest == line
        assert header == ["a", "b"]
        assert data[1] == [0.5, 0.25]
        assert data[2][0] == math.inf and data[2][1] == 1e-300

    def test_csv_without_manifest_line(self, tmp_path):
        path = str(tmp_path / "plain.csv")
        write_csv(path, ["v"], [(1.25,)])
        manifest, header, data = read_csv(path)
        assert manifest is None
        assert data == [[1.25]]

    def test_row_width_mismatch(self, tmp_path):
        with pytest.raises(ValueError):
            write_csv(str(tmp_path / "bad.csv"), ["a", "b"], [(1.0,)])

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        path = tmp_path / "out.txt"
        atomic_write_text(str(path), "hello")
        assert path.read_text() == "hello"
        assert os.listdir(tmp_path) == ["out.txt"]

    def test_atomic_write_bad_target(self):
        with pytest.raises(InputOutputError):
            atomic_write_text("/proc/definitely/not/writable.txt", "x")

    def test_manifest_round_trip(self, tmp_path):
        path = str(tmp_path / "manifest.json")
        write_manifest(path, {"config": {"seed": 5}, "derived": {"area": math.pi}})
        back = read_manifest(path)
        assert back["config"]["seed"] == 5
        assert back["derived"]["area"] == math.pi
        assert "wall_clock_utc" in back

    def test_derived_check_passes(self):
        m = {"derived": {"area": 3.141592653589793, "rate": 0.5}}
        check_manifest_derived(m, {"area": math.pi, "rate": 0.5})

    def test_derived_check_catches_drift(self):
        m = {"derived": {"area": 3.0}}
        with pytest.raises(ValidationError, match="area"):
            check_manifest_derived(m, {"area": math.pi})

    def test_derived_check_infinity(self):
        check_manifest_derived({"derived": {"tau_d": math.inf}},
                               {"tau_d": math.inf})


def run_cli(tmp_path, doc, command=None, extra=()):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(doc))
    out = tmp_path / "out"
    argv = [command or doc["command"], "--config", str(cfg), "--out", str(out)]
    argv.extend(extra)
    code = main(argv)
    return code, out


class TestCommandLine:
    def test_fig3_end_to_end(self, tmp_path):
        doc = {"command": "fig3",
               "params": {"tauD_over_TH": 0.3,
                          "taud_over_TH": [0.05, 0.1, 0.3, 1.0, "inf"],
                          "n_points": 61}}
        code, out = run_cli(tmp_path, doc)
        assert code == 0
        manifest, header, rows = read_csv(str(out / "fig3.csv"))
        assert header[0] == "t_over_TH"
        assert header[1] == "reference_inf"
        assert len(header) == 2 + 5  # reference plus one column per tau_d
        assert len(rows) == 61
        ref = np.array([r[1] for r in rows])
        for j in range(2, 6):  # finite tau_d columns sit below the reference
            col = np.array([r[j] for r in rows])
            assert np.all(col[1:] < ref[1:])

    def test_pair_decoherence_time_series(self, tmp_path):
        doc = {"command": "pair-decoherence",
               "geometry": {"shape": "cardioid", "opening_length": 0.2},
               "ensemble": {"n_samples": 16, "seed": 5},
               "params": {"alpha": 1e-3},
               "grid": {"t_collisions": 5}}
        code, out = run_cli(tmp_path, doc)
        assert code == 0
        manifest, header, rows = read_csv(str(out / "pair-decoherence.csv"))
        assert header == ["time", "exponent", "std_error"]
        assert rows[0][0] == 0.0 and rows[0][1] == 0.0
        exponent = np.array([r[1] for r in rows])
        # a running integral of a non-negative integrand never decreases
        assert np.all(np.diff(exponent) >= 0.0)
        assert exponent[-1] > 0.0
        results = json.loads((out / "manifest.json").read_text())["results"]
        assert results["mean_exponent"] == pytest.approx(exponent[-1])
        assert results["expected_rate_per_alpha"] > 0.0

    def test_missing_config_file(self, tmp_path):
        code = main(["fig3", "--config", str(tmp_path / "nope.json")])
        assert code == 1

    def test_bad_json_exit_2(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{nope")
        assert main(["fig3", "--config", str(cfg)]) == 2

    def test_missing_seed_exit_3(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"command": "simulate",
                                   "geometry": {"shape": "cardioid"},
                                   "ensemble": {"n_samples": 10}}))
        assert main(["simulate", "--config", str(cfg)]) == 3

    def test_command_mismatch_exit_3(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(MINIMAL_FIG3)
        assert main(["peak", "--config", str(cfg)]) == 3

    def test_statistics_failure_exit_5(self, tmp_path):
        doc = {"command": "simulate",
               "geometry": {"shape": "cardioid", "opening_length": 0.2},
               "ensemble": {"seed": 2, "n_samples": 400},
               "grid": {"t_max": 40.0, "fit_window": [0.0, 0.1]}}
        code, _ = run_cli(tmp_path, doc)
        assert code == 5

    def test_numeric_failure_exit_4(self, tmp_path):
        # an su_cut that truncates nearly the whole domain cannot converge
        doc = {"command": "quadrature",
               "params": {"lambda_tauD": [10.0], "ehrenfest_fractions": [0.05],
                          "t_over_tauD": [2.0], "su_cut": 0.9}}
        code, _ = run_cli(tmp_path, doc)
        assert code == 4

    def test_bad_threads_exit_2(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(MINIMAL_FIG3)
        assert main(["fig3", "--config", str(cfg), "--threads", "0"]) == 2

    def test_threads_env_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CHAODECAY_THREADS", "2")
        doc = {"command": "simulate",
               "geometry": {"shape": "cardioid", "opening_length": 0.2},
               "ensemble": {"seed": 5, "n_samples": 300},
               "grid": {"t_max": 60.0}}
        code, out = run_cli(tmp_path, doc)
        assert code == 0

    def test_peak_reference_value(self, tmp_path):
        doc = {"command": "peak",
               "params": {"dwell_time": 0.3, "heisenberg_time": 1.0,
                          "tau_d": 1e9}}
        code, out = run_cli(tmp_path, doc)
        assert code == 0
        results = read_manifest(str(out / "manifest.json"))["results"]
        assert results["t_star_over_dwell"] == pytest.approx(2.0, rel=1e-5)

    def test_quadrature_csv_columns(self, tmp_path):
        doc = {"command": "quadrature",
               "params": {"lambda_tauD": [10.0], "ehrenfest_fractions": [0.05],
                          "t_over_tauD": [2.0]}}
        code, out = run_cli(tmp_path, doc)
        assert code == 0
        _, header, rows = read_csv(str(out / "quadrature.csv"))
        assert header == ["lambda_tauD", "c2_over_hbar", "alpha_over_lambda",
                          "t_over_tauD", "quad_value", "closed_form",
                          "rel_dev", "est_err", "im_part"]
        assert len(rows) == 1


class TestReproducibility:
    def test_byte_identical_reruns(self, tmp_path):
        doc = {"command": "simulate",
               "geometry": {"shape": "cardioid", "opening_length": 0.2},
               "ensemble": {"seed": 11, "n_samples": 500},
               "grid": {"t_max": 60.0}}
        _, out1 = run_cli(tmp_path, doc)
        csv1 = (out1 / "simulate.csv").read_bytes()
        (out1 / "simulate.csv").unlink()
        code, out2 = run_cli(tmp_path, doc, extra=["--threads", "8"])
        assert code == 0
        assert (out2 / "simulate.csv").read_bytes() == csv1

    def test_manifest_config_round_trip(self, tmp_path):
        doc = {"command": "fig3",
               "params": {"tauD_over_TH": 0.3, "taud_over_TH": [0.1, "inf"],
                          "n_points": 31}}
        _, out1 = run_cli(tmp_path, doc)
        manifest = read_manifest(str(out1 / "manifest.json"))
        rerun_cfg = tmp_path / "rerun.json"
        rerun_cfg.write_text(json.dumps(manifest["config"]))
        out2 = tmp_path / "out2"
        assert main(["fig3", "--config", str(rerun_cfg), "--out", str(out2)]) == 0
        assert (out2 / "fig3.csv").read_bytes() == (out1 / "fig3.csv").read_bytes()

    def test_manifest_derived_recompute(self, tmp_path):
        doc = {"command": "simulate",
               "geometry": {"shape": "cardioid", "opening_length": 0.2},
               "ensemble": {"seed": 7, "n_samples": 300},
               "grid": {"t_max": 50.0}}
        _, out = run_cli(tmp_path, doc)
        manifest = read_manifest(str(out / "manifest.json"))
        g = manifest["config"]["geometry"]
        area = 1.5 * math.pi * g["scale"] ** 2
        perimeter = 8.0 * g["scale"]
        check_manifest_derived(manifest, {
            "area": area,
            "perimeter": perimeter,
            "opening_length": g["opening_length"],
            "dwell_time": math.pi * area / g["opening_length"],
            "mean_free_time": math.pi * area / perimeter,
            "heisenberg_time": area,
        })

    def test_wall_clock_only_in_manifest(self, tmp_path):
        doc = {"command": "fig3",
               "params": {"tauD_over_TH": 0.3, "taud_over_TH": [0.1],
                          "n_points": 21}}
        _, out = run_cli(tmp_path, doc)
        line, _, _ = read_csv(str(out / "fig3.csv"))
        assert "wall_clock_utc" not in json.dumps(line)
        assert "wall_clock_utc" in read_manifest(str(out / "manifest.json"))


class TestCompareReport:
    def test_synthetic_exponential(self, tmp_path):
        tau = 2.0
        t = np.linspace(0.0, 8.0, 200)
        path = str(tmp_path / "synth.csv")
        write_csv(path, ["time", "survival", "std_error"],
                  zip(t, np.exp(-t / tau), np.full_like(t, 1e-6)),
                  manifest_line={"ensemble": {"n_samples": 100000},
                                 "geometry_hash": "synth"})
        p = SemiclassicalParams(dwell_time=tau, heisenberg_time=10.0)
        report = compare_report(path, p)
        assert report["rel_deviation"] == pytest.approx(0.0, abs=1e-10)
        assert report["peak"]["t_star_over_dwell"] == pytest.approx(2.0, rel=1e-4)

    def test_schema_mismatch(self, tmp_path):
        path = str(tmp_path / "wrong.csv")
        write_csv(path, ["t", "s"], [(0.0, 1.0)],
                  manifest_line={"ensemble": {"n_samples": 10}})
        with pytest.raises(ValidationError):
            compare_report(path, SemiclassicalParams(dwell_time=1.0,
                                                     heisenberg_time=1.0))

    def test_missing_embedded_manifest(self, tmp_path):
        path = str(tmp_path / "bare.csv")
        write_csv(path, ["time", "survival", "std_error"], [(0.0, 1.0, 0.0)])
        with pytest.raises(ValidationError):
            compare_report(path, SemiclassicalParams(dwell_time=1.0,
                                                     heisenberg_time=1.0))
