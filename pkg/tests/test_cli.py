"""Tests for scenario configs, report generation, determinism, and the CLI."""

import json
import os

import numpy as np
import pytest

from sympdist.cli import main
from sympdist.errors import ConfigError
from sympdist.paths import random_isotopy
from sympdist.scenarios import (
    BUNDLED_SCENARIOS,
    load_scenario,
    report_payload_for_comparison,
    run_scenario,
    validate_scenario,
)
from sympdist.serialize import load_json, save_json
from sympdist.torus import DiffeoMap, TorusModel, random_closed_form


class TestValidation:
    def test_bundled_configs_valid(self):
        for name, config in BUNDLED_SCENARIOS.items():
            validate_scenario(config)

    def test_missing_seed(self):
        with pytest.raises(ConfigError) as err:
            validate_scenario({"version": 1, "name": "x", "steps": []})
        assert err.value.pointer == "seed"

    def test_unknown_step_kind(self):
        config = {"version": 1, "name": "x", "seed": 1,
                  "steps": [{"kind": "nonsense"}]}
        with pytest.raises(ConfigError) as err:
            validate_scenario(config)
        assert err.value.pointer == "steps[0].kind"

    def test_wrong_version(self):
        with pytest.raises(ConfigError) as err:
            validate_scenario({"version": 99, "name": "x", "seed": 1, "steps": []})
        assert err.value.pointer == "version"


class TestRunScenario:
    def test_empty_scenario_passes(self):
        report = run_scenario(load_scenario("empty"))
        assert report["passed"]
        assert report["n_checks"] == 0

    def test_deterministic_reports(self):
        config = {
            "version": 1, "name": "det", "seed": 7,
            "model": {"half_dim": 1, "grid_res": 16},
            "steps": [{"kind": "hodge_roundtrip", "params": {"n_forms": 5}},
                      {"kind": "flux_lattice", "params": {"n_samples": 4}}],
        }
        r1 = run_scenario(config)
        r2 = run_scenario(config)
        assert json.dumps(report_payload_for_comparison(r1), sort_keys=True) == \
            json.dumps(report_payload_for_comparison(r2), sort_keys=True)

    def test_threaded_matches_serial(self):
        config = {
            "version": 1, "name": "thr", "seed": 7,
            "model": {"half_dim": 1, "grid_res": 16},
            "steps": [{"kind": "hodge_roundtrip", "params": {"n_forms": 5}},
                      {"kind": "flux_lattice", "params": {"n_samples": 4}},
                      {"kind": "length_monotonicity", "params": {"n_paths": 5}}],
        }
        serial = report_payload_for_comparison(run_scenario(config, threads=1))
        threaded = report_payload_for_comparison(run_scenario(config, threads=3))
        assert json.dumps(serial, sort_keys=True) == json.dumps(threaded, sort_keys=True)

    def test_seed_override_changes_draws(self):
        config = {
            "version": 1, "name": "ovr", "seed": 7,
            "model": {"half_dim": 1, "grid_res": 16},
            "steps": [{"kind": "banyaga_vs_hofer", "params": {"n_paths": 3}}],
        }
        base = run_scenario(config)
        other = run_scenario(config, seed_override=8)
        assert base["scenario"]["seed"] == 7
        assert other["scenario"]["seed"] == 8
        t1 = base["steps"][0]["table"]
        t2 = other["steps"][0]["table"]
        assert any(abs(a["banyaga"] - b["banyaga"]) > 1e-12 for a, b in zip(t1, t2))

    @pytest.mark.parametrize("name", ["torus-ham-distance-sweep", "flux-lattice",
                                      "product-split"])
    def test_bundled_scenarios_pass(self, name):
        report = run_scenario(load_scenario(name))
        assert report["passed"], [
            c for s in report["steps"] for c in s["checks"] if not c["passed"]
        ]

    def test_distance_upper_step_with_fixture(self, tmp_path):
        model = TorusModel(grid_res=16)
        target = DiffeoMap.translation(model, [0.25, 0.0])
        fixture = tmp_path / "target.json"
        save_json(target, str(fixture))
        config = {
            "version": 1, "name": "fixture-target", "seed": 3,
            "model": {"half_dim": 1, "grid_res": 16},
            "steps": [{
                "kind": "distance_upper",
                "params": {"targets": [
                    {"kind": "translation", "vector": [0.25, 0.0],
                     "upper_bound": 0.25},
                    {"kind": "map_file", "path": str(fixture),
                     "upper_bound": 0.25},
                ]},
            }],
        }
        report = run_scenario(config)
        assert report["passed"], report["steps"][0]["checks"]


class TestCliCommands:
    def test_run_empty_exit_zero(self, capsys):
        assert main(["run", "empty"]) == 0
        out = capsys.readouterr().out
        assert json.loads(out)["passed"]

    def test_run_writes_report(self, tmp_path, capsys):
        out_file = tmp_path / "report.json"
        assert main(["run", "empty", "--out", str(out_file)]) == 0
        assert json.load(open(out_file))["passed"]

    def test_run_missing_config_exit_two(self, capsys):
        assert main(["run", "/nonexistent/config.json"]) == 2

    def test_run_invalid_schema_exit_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"version": 1, "name": "bad", "seed": 1,
                                   "steps": [{"kind": "bogus"}]}))
        assert main(["run", str(bad)]) == 2
        assert "steps[0].kind" in capsys.readouterr().err

    def test_failing_check_exit_one(self, tmp_path, capsys):
        # an impossible bound makes the distance_upper check fail
        config = {
            "version": 1, "name": "fail", "seed": 3,
            "model": {"half_dim": 1, "grid_res": 16},
            "steps": [{"kind": "distance_upper", "params": {"targets": [
                {"kind": "translation", "vector": [0.25, 0.0],
                 "upper_bound": 0.01, "tolerance": 0.0},
            ]}}],
        }
        path = tmp_path / "fail.json"
        path.write_text(json.dumps(config))
        assert main(["run", str(path)]) == 1
        assert "FAILED checks" in capsys.readouterr().err

    def test_validate_command(self, capsys):
        assert main(["validate", "torus-ham-distance-sweep"]) == 0

    def test_plotdata(self, tmp_path, capsys):
        report_file = tmp_path / "report.json"
        config = {
            "version": 1, "name": "plot", "seed": 5,
            "model": {"half_dim": 1, "grid_res": 16},
            "steps": [{"kind": "flux_lattice", "params": {"n_samples": 3}}],
        }
        report = run_scenario(config)
        report_file.write_text(json.dumps(report))
        out_dir = tmp_path / "csv"
        assert main(["plotdata", str(report_file), "--out", str(out_dir)]) == 0
        files = os.listdir(out_dir)
        assert files == ["step_00_flux_lattice.csv"]
        content = (out_dir / files[0]).read_text()
        assert content.startswith("# scenario: plot")
        assert "# columns:" in content

    def test_fixtures_list(self, capsys, monkeypatch, tmp_path):
        (tmp_path / "a_fixture.json").write_text("{}")
        monkeypatch.setenv("SYMPDIST_FIXTURES", str(tmp_path))
        assert main(["fixtures", "list"]) == 0
        out = capsys.readouterr().out
        assert "torus-ham-distance-sweep" in out
        assert "a_fixture.json" in out


class TestSerialize:
    def test_model_roundtrip(self, tmp_path):
        model = TorusModel(half_dim=1, grid_res=16, periods=(2.0, 1.0),
                           metric_diag=(1.0, 4.0))
        path = tmp_path / "model.json"
        save_json(model, str(path))
        back = load_json(str(path))
        assert back.compatible(model)

    def test_form_roundtrip(self, tmp_path, rng):
        model = TorusModel(grid_res=16)
        form = random_closed_form(model, rng)
        path = tmp_path / "form.json"
        save_json(form, str(path))
        back = load_json(str(path))
        assert np.array_equal(back.components, form.components)
        assert back.tag == form.tag

    def test_map_roundtrip(self, tmp_path):
        from sympdist.torus import hamiltonian_shear

        model = TorusModel(grid_res=16)
        phi = hamiltonian_shear(model, 0.2)
        path = tmp_path / "map.json"
        save_json(phi, str(path))
        back = load_json(str(path))
        assert np.array_equal(back.displacement, phi.displacement)

    def test_path_roundtrip(self, tmp_path, rng):
        model = TorusModel(grid_res=16)
        p = random_isotopy(model, rng, n_steps=4)
        path = tmp_path / "path.json"
        save_json(p, str(path))
        back = load_json(str(path))
        assert np.array_equal(back.samples, p.samples)

    def test_unknown_type_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"type": "mystery"}))
        with pytest.raises(ConfigError):
            load_json(str(bad))
