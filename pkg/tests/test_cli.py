import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from dampreg.cli import ConfigError, main, parse_config
from dampreg.verify import REPORT_SCHEMA

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def base_config(**over):
    cfg = {
        "schema_version": 1,
        "system": "AutonomousKepler2D",
        "params": {"m": 1.0, "k": 1.0, "lambda": 0.0},
        "initial_conditions": {"position": [1.0, 0.0], "velocity": [0.0, 1.0]},
        "integrator": {"t_end": 20.0},
    }
    cfg.update(over)
    return cfg


def read_outputs(out):
    with open(out / "trajectory.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float), json.loads((out / "summary.json").read_text())


class TestSimulate:
    def test_circular_kepler(self, tmp_path):
        assert main(["simulate", str(CONFIGS / "circular_kepler.json"), "-o", str(tmp_path)]) == 0
        header, data, summary = read_outputs(tmp_path)
        assert summary["status"] == "Completed"
        assert header == summary["columns"] == ["t", "q0", "q1", "v0", "v1", "script_e", "ang_mom"]
        assert len(data) == summary["samples"]
        e = data[:, header.index("script_e")]
        assert np.ptp(e) < 1e-9 and e[0] == 0.5
        assert summary["drifts"]["script_e"]["max_abs_drift"] < 1e-9
        assert data[-1, 0] == 20.0 == summary["final_state"]["t"]

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = str(CONFIGS / "circular_kepler.json")
        main(["--quiet", "simulate", cfg, "-o", str(tmp_path / "a")])
        main(["--quiet", "simulate", cfg, "-o", str(tmp_path / "b")])
        for f in ("trajectory.csv", "summary.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_seventeen_digit_round_trip(self, tmp_path):
        main(["--quiet", "simulate", str(CONFIGS / "circular_kepler.json"), "-o", str(tmp_path)])
        text = (tmp_path / "trajectory.csv").read_text().splitlines()[5].split(",")
        assert all(repr(float(x)) == repr(float("%.17g" % float(x))) for x in text)

    def test_radial_damped_collision(self, tmp_path):
        assert main(["simulate", str(CONFIGS / "radial_damped_kepler.json"), "-o", str(tmp_path)]) == 2
        _, data, summary = read_outputs(tmp_path)
        assert summary["status"] == "CollisionAbort"
        assert len(data) == summary["samples"]

    def test_radial_regularized_passes_through(self, tmp_path):
        assert main(["simulate", str(CONFIGS / "radial_ks.json"), "-o", str(tmp_path)]) == 0
        header, data, summary = read_outputs(tmp_path)
        assert header[:10] == ["tau", "u0", "u1", "u2", "u3", "u_prime0", "u_prime1", "u_prime2", "u_prime3", "t"]
        assert summary["final_state"]["t"] == 3.0
        h = data[:, header.index("h_oscillator")]
        assert np.ptp(h) / abs(h[0]) < 1e-6
        r = np.sum(data[:, 1:5] ** 2, axis=1)
        assert r.min() < 1e-3

    def test_max_steps_exits_2(self, tmp_path):
        cfg = write(tmp_path, "c.json", base_config(integrator={"max_steps": 5}))
        assert main(["--quiet", "simulate", cfg, "-o", str(tmp_path / "o")]) == 2
        assert read_outputs(tmp_path / "o")[2]["status"] == "MaxSteps"

    def test_unknown_key_named(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", base_config(foo=1))
        assert main(["simulate", cfg, "-o", str(tmp_path / "o")]) == 1
        assert "'foo'" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()

    def test_json_syntax_error_has_line(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", '{\n  "schema_version": 1,\n  "system": \n}')
        assert main(["simulate", cfg, "-o", str(tmp_path / "o")]) == 1
        assert "line 4" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["simulate", str(tmp_path / "absent.json"), "-o", str(tmp_path)]) == 1

    def test_undefined_output_quantity(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", base_config(outputs=["h_oscillator"]))
        assert main(["simulate", cfg, "-o", str(tmp_path / "o")]) == 1
        assert "h_oscillator" in capsys.readouterr().err


class TestParse:
    @pytest.mark.parametrize("change,field", [
        ({"schema_version": 2}, "schema_version"),
        ({"system": "Pendulum"}, "system"),
        ({"params": {"lamda": 0.1}}, "lamda"),
        ({"initial_conditions": {"position": [1.0, 0.0, 0.0], "velocity": [0.0, 1.0]}}, "position"),
        ({"initial_conditions": {"position": [1.0, 0.0]}}, "velocity"),
        ({"initial_conditions": {"position": [1.0, 0.0], "velocity": [0, 1], "frame": "physical"}}, "frame"),
        ({"integrator": {"method": "Euler"}}, "method"),
        ({"integrator": {"tol": 1e-9}}, "tol"),
        ({"outputs": ["energy"]}, "energy"),
    ])
    def test_diagnostic_names_field(self, change, field):
        with pytest.raises(ConfigError, match=field):
            parse_config(base_config(**change))

    def test_regularized_needs_energy(self):
        cfg = base_config(system="RegularizedLC")
        with pytest.raises(ConfigError, match="initial_conditions"):
            parse_config(cfg)
        cfg["initial_conditions"]["script_e"] = 0.5
        assert parse_config(cfg).ctx.energy_script_e == 0.5

    def test_physical_frame_maps_state(self):
        cfg = base_config(system="RegularizedLC")
        cfg["initial_conditions"]["frame"] = "physical"
        sc = parse_config(cfg)
        assert sc.ctx.energy_script_e == pytest.approx(0.5)
        assert len(sc.y0) == 5 and sc.y0[-1] == 0.0

    def test_physical_energy_conflict(self):
        cfg = base_config(system="RegularizedKS")
        cfg["initial_conditions"] = {"frame": "physical", "position": [1, 0, 0], "velocity": [0, 1, 0], "script_e": 0.3}
        with pytest.raises(ConfigError, match="script_e"):
            parse_config(cfg)


class TestVerify:
    def test_filtered_report(self, tmp_path):
        out = tmp_path / "r.json"
        assert main(["--quiet", "verify", "--filter", "algebra.", "-o", str(out)]) == 0
        doc = json.loads(out.read_text())
        jsonschema.validate(doc, REPORT_SCHEMA)
        assert doc and all(e["name"].startswith("algebra.") and e["pass"] for e in doc)

    def test_no_match(self, capsys):
        assert main(["verify", "--filter", "zzz"]) == 1
        assert "no checks matched" in capsys.readouterr().err

    def test_full_suite_exits_zero(self, tmp_path):
        out = tmp_path / "r.json"
        assert main(["--quiet", "--threads", "4", "verify", "-o", str(out)]) == 0
        jsonschema.validate(json.loads(out.read_text()), REPORT_SCHEMA)

    def test_tool_seed_overrides_flag(self, tmp_path, monkeypatch):
        runs = {}
        for label, env, flag in (("env", "7", "9"), ("flag", None, "7"), ("other", None, "9")):
            if env:
                monkeypatch.setenv("TOOL_SEED", env)
            else:
                monkeypatch.delenv("TOOL_SEED", raising=False)
            out = tmp_path / f"{label}.json"
            main(["--quiet", "--seed", flag, "verify", "--filter", "lc_matrix", "-o", str(out)])
            runs[label] = json.loads(out.read_text())[0]["measured"]
        assert runs["env"] == runs["flag"] != runs["other"]

    def test_bad_threads(self):
        assert main(["--threads", "0", "verify", "--filter", "algebra."]) == 1


class TestTransform:
    @pytest.mark.parametrize("spec,expected", [
        ({"transform": "ks_forward", "args": {"u": [1, 0, 0, 0]}}, [1, 0, 0]),
        ({"transform": "lc_forward", "args": {"u": [1, 1]}}, [0, 2]),
        ({"transform": "bilinear", "args": {"u": [1, 0, 0, 0], "u_prime": [0, 0, 0, 1]}}, 1),
        ({"transform": "gen_lc_forward", "args": {"u": [0, 1], "n": 2}}, [0, -1]),
        ({"transform": "time_rate", "args": {"system": "KS", "r": 0.5}}, 2),
    ])
    def test_examples(self, tmp_path, capsys, spec, expected):
        assert main(["transform", write(tmp_path, "t.json", spec)]) == 0
        got = json.loads(capsys.readouterr().out)["result"]
        assert np.allclose(got, expected, atol=1e-15)

    def test_damp_to_autonomous(self, tmp_path, capsys):
        spec = {"transform": "damp_to_autonomous",
                "args": {"q": [1, 0], "v": [0, 1], "t": 2.0, "params": {"lambda": 0.5}}}
        assert main(["transform", write(tmp_path, "t.json", spec)]) == 0
        got = json.loads(capsys.readouterr().out)["result"]
        assert got["q"] == pytest.approx([math.e**0.5, 0])
        assert got["v"] == pytest.approx([0.25 * math.e**0.5, math.e**0.5])

    def test_shipped_spec(self, capsys):
        assert main(["transform", str(CONFIGS / "ks_forward.json")]) == 0
        assert json.loads(capsys.readouterr().out) == {"result": [1.0, 0.0, 0.0]}

    @pytest.mark.parametrize("spec", [
        {"transform": "no_such_map", "args": {}},
        {"transform": "ks_forward", "args": {}},
        {"transform": "ks_inverse", "args": {"x": [0, 0, 0, 0, 0]}},
        [],
    ])
    def test_errors(self, tmp_path, spec):
        assert main(["transform", write(tmp_path, "t.json", spec)]) == 1


def test_console_entry_point(tmp_path):
    spec = write(tmp_path, "t.json", {"transform": "lc_forward", "args": {"u": [1, 1]}})
    proc = subprocess.run([sys.executable, "-m", "dampreg", "transform", spec], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout) == {"result": [0.0, 2.0]}
