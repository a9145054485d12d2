import json
import subprocess
import sys

import numpy as np
import pytest

from hjreduce.cli import (SCENARIO_SCHEMA, ScenarioError, emit_trajectory,
                          load_scenario, read_trajectory)
from hjreduce.phase_space import Trajectory


def run_cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "hjreduce", *args],
                          capture_output=True, text=True, cwd=cwd)


def write_scenario(tmp_path, doc, name="scn.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestLoadScenario:
    def test_bundled_names(self):
        for name in ("calogero", "heavytop", "freeparticle", "oscillator",
                     "magnetic_synthetic"):
            doc = load_scenario(name)
            assert doc["name"] == name

    def test_bundled_with_extension(self):
        assert load_scenario("calogero.json")["name"] == "calogero"

    def test_missing(self):
        with pytest.raises(ScenarioError):
            load_scenario("no_such_scenario")

    def test_schema_rejects_unknown_field(self, tmp_path):
        path = write_scenario(tmp_path, {"name": "x", "coords": ["q"],
                                         "hamiltonian": "p", "bogus": 1})
        with pytest.raises(ScenarioError) as ei:
            load_scenario(path)
        assert "bogus" in str(ei.value)

    def test_schema_rejects_bad_branch(self, tmp_path):
        path = write_scenario(tmp_path, {
            "name": "x", "coords": ["q"], "hamiltonian": "0.5*p^2",
            "solve": {"range": [0, 1], "branch": 2}})
        with pytest.raises(ScenarioError):
            load_scenario(path)

    def test_schema_is_strict(self):
        assert SCENARIO_SCHEMA["additionalProperties"] is False


class TestTrajectoryCSV:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        tr = Trajectory(np.linspace(0, 1, 7),
                        rng.normal(size=(7, 2)) * np.pi,
                        rng.normal(size=(7, 2)) / 3.0)
        p1 = tmp_path / "a.csv"
        p2 = tmp_path / "b.csv"
        emit_trajectory(tr, str(p1))
        back = read_trajectory(str(p1))
        np.testing.assert_array_equal(back.times, tr.times)
        np.testing.assert_array_equal(back.qs, tr.qs)
        np.testing.assert_array_equal(back.ps, tr.ps)
        emit_trajectory(back, str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_header(self, tmp_path):
        tr = Trajectory([0.0, 1.0], [[1], [2]], [[3], [4]])
        path = tmp_path / "t.csv"
        emit_trajectory(tr, str(path))
        assert path.read_text().splitlines()[0] == "t,q1,p1"

    def test_reject_malformed(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_trajectory(str(path))


class TestExitCodes:
    def test_ok(self, tmp_path):
        r = run_cli("reduce", "calogero", "--out", str(tmp_path))
        assert r.returncode == 0, r.stderr

    def test_scenario_error(self, tmp_path):
        path = write_scenario(tmp_path, {"name": "x", "coords": ["q"]})
        r = run_cli("simulate", path)
        assert r.returncode == 2
        assert "scenario error" in r.stderr

    def test_parse_error_in_hamiltonian(self, tmp_path):
        path = write_scenario(tmp_path, {"name": "x", "coords": ["q"],
                                         "hamiltonian": "0.5*p^2+"})
        r = run_cli("simulate", path)
        assert r.returncode == 2

    def test_residual_failure(self, tmp_path):
        r = run_cli("solve-hj", "calogero", "--tol", "1e-20",
                    "--out", str(tmp_path))
        assert r.returncode == 1
        assert "residual failure" in r.stderr

    def test_numeric_failure(self, tmp_path):
        path = write_scenario(tmp_path, {
            "name": "turning", "coords": ["q"], "momenta": ["p"],
            "hamiltonian": "0.5*(p^2+q^2)", "energy": 0.5,
            "solve": {"range": [-2, 2], "n_nodes": 51}})
        r = run_cli("solve-hj", path, "--out", str(tmp_path))
        assert r.returncode == 3
        assert "numeric failure" in r.stderr

    def test_unknown_command(self):
        r = run_cli("frobnicate", "calogero")
        assert r.returncode == 2


class TestReduceCommand:
    def test_emits_valid_scenario(self, tmp_path):
        r = run_cli("reduce", "calogero", "--out", str(tmp_path))
        assert r.returncode == 0, r.stderr
        out = tmp_path / "calogero_reduced.json"
        doc = load_scenario(str(out))
        assert doc["coords"] == ["q"]
        assert doc["momenta"] == ["p"]
        # the reduced scenario can be solved directly
        r2 = run_cli("solve-hj", str(out), "--out", str(tmp_path))
        assert r2.returncode == 0, r2.stderr
        rep = json.loads((tmp_path / "calogero_reduced_solve.json")
                         .read_text())
        assert rep["max_node_residual"] <= 1e-10

    def test_reduced_hamiltonian_value(self, tmp_path):
        run_cli("reduce", "calogero", "--out", str(tmp_path))
        doc = json.loads((tmp_path / "calogero_reduced.json").read_text())
        from hjreduce.expr import evaluate, parse
        h = parse(doc["hamiltonian"])
        assert evaluate(h, {"q": 2.0, "p": 1.0}) == 1.0 + 0.25


class TestSolveCommand:
    def test_table_and_report(self, tmp_path):
        r = run_cli("solve-hj", "calogero", "--out", str(tmp_path))
        assert r.returncode == 0, r.stderr
        lines = (tmp_path / "calogero_table.csv").read_text().splitlines()
        assert lines[0] == "y,W,dW"
        assert len(lines) == 2002
        first = [float(v) for v in lines[1].split(",")]
        assert first[0] == 0.8 and first[1] == 0.0
        rep = json.loads((tmp_path / "calogero_solve.json").read_text())
        assert rep["pass"] is True
        assert rep["energy"] == 2.0

    def test_grid_override(self, tmp_path):
        r = run_cli("solve-hj", "calogero", "--grid", "11",
                    "--out", str(tmp_path))
        assert r.returncode == 0, r.stderr
        lines = (tmp_path / "calogero_table.csv").read_text().splitlines()
        assert len(lines) == 12


class TestVerifyCommand:
    def test_reduction_mode(self, tmp_path):
        r = run_cli("verify", "calogero", "--grid", "12",
                    "--out", str(tmp_path))
        assert r.returncode == 0, r.stderr
        rep = json.loads((tmp_path / "calogero_verify.json").read_text())
        assert rep["mode"] == "reduction"
        assert rep["pass"] is True
        assert rep["hj_max_dev"] <= 1e-8
        assert rep["momentum_dev"] <= 1e-12

    def test_magnetic_mode(self, tmp_path):
        r = run_cli("verify", "magnetic_synthetic", "--out", str(tmp_path))
        assert r.returncode == 0, r.stderr
        rep = json.loads((tmp_path / "magnetic_synthetic_verify.json")
                         .read_text())
        assert rep["mode"] == "magnetic"
        assert rep["beta"] == {"dy1^dy2": "1.0"}
        assert rep["magnetic_residual"] == 0.0

    def test_family_mode(self, tmp_path):
        r = run_cli("verify", "oscillator", "--grid", "40",
                    "--out", str(tmp_path))
        assert r.returncode == 0, r.stderr
        rep = json.loads((tmp_path / "oscillator_verify.json").read_text())
        assert rep["mode"] == "complete_solution"
        assert rep["min_abs_det"] >= 1e-6

    def test_cyclic_mode(self, tmp_path):
        r = run_cli("verify", "heavytop", "--grid", "40",
                    "--out", str(tmp_path))
        assert r.returncode == 0, r.stderr
        rep = json.loads((tmp_path / "heavytop_verify.json").read_text())
        assert rep["mode"] == "cyclic"
        assert rep["max_offnode_residual"] <= 1e-8


class TestPipelineCommands:
    def test_reconstruct(self, tmp_path):
        r = run_cli("reconstruct", "calogero", "--out", str(tmp_path))
        assert r.returncode == 0, r.stderr
        rep = json.loads((tmp_path / "calogero_reconstruct.json")
                         .read_text())
        assert rep["sup_dev_vs_projected"] <= 1e-6
        assert rep["graph_relatedness_dev"] <= 1e-6
        tr = read_trajectory(str(tmp_path / "calogero_reconstructed.csv"))
        assert len(tr) == 1001
        np.testing.assert_allclose(tr.qs[0], [1.0, -1.0], atol=1e-14)

    def test_simulate(self, tmp_path):
        r = run_cli("simulate", "freeparticle", "--out", str(tmp_path))
        assert r.returncode == 0, r.stderr
        tr = read_trajectory(str(tmp_path / "freeparticle_trajectory.csv"))
        np.testing.assert_allclose(tr.qs[-1], [5.0], atol=1e-12)
        rep = json.loads((tmp_path / "freeparticle_simulate.json")
                         .read_text())
        assert rep["max_energy_drift"] <= 1e-12

    def test_simulate_flag_overrides(self, tmp_path):
        r = run_cli("simulate", "freeparticle", "--t-end", "0.5", "--dt",
                    "0.05", "--out", str(tmp_path))
        assert r.returncode == 0, r.stderr
        tr = read_trajectory(str(tmp_path / "freeparticle_trajectory.csv"))
        assert len(tr) == 11
        assert tr.times[-1] == pytest.approx(0.5)

    def test_integrate(self, tmp_path):
        r = run_cli("integrate", "oscillator", "--out", str(tmp_path))
        assert r.returncode == 0, r.stderr
        rep = json.loads((tmp_path / "oscillator_scheme.json").read_text())
        assert rep["symplecticity_defect"] <= 1e-9
        assert rep["pass"] is True

    def test_integrate_momentum(self, tmp_path):
        r = run_cli("integrate", "calogero", "--out", str(tmp_path))
        assert r.returncode == 0, r.stderr
        rep = json.loads((tmp_path / "calogero_scheme.json").read_text())
        assert rep["max_momentum_drift"] <= 1e-10

    def test_equilibrium(self, tmp_path):
        r = run_cli("equilibrium", "freeparticle", "--out", str(tmp_path))
        assert r.returncode == 0, r.stderr
        rep = json.loads((tmp_path / "freeparticle_equilibrium.json")
                         .read_text())
        assert rep["max_variation"] <= 1e-8
        np.testing.assert_allclose(rep["alpha0"], [3.0], atol=1e-12)
        np.testing.assert_allclose(rep["beta0"], [-2.0], atol=1e-12)
        lines = (tmp_path / "freeparticle_equilibrium.csv").read_text()
        assert lines.splitlines()[0] == "t,alpha1,beta1"


class TestDeterminism:
    def test_verify_byte_identical(self, tmp_path):
        d1 = tmp_path / "r1"
        d2 = tmp_path / "r2"
        for d in (d1, d2):
            d.mkdir()
            r = run_cli("verify", "calogero", "--grid", "10",
                        "--out", str(d))
            assert r.returncode == 0, r.stderr
        assert ((d1 / "calogero_verify.json").read_bytes()
                == (d2 / "calogero_verify.json").read_bytes())

    def test_reconstruct_byte_identical(self, tmp_path):
        d1 = tmp_path / "r1"
        d2 = tmp_path / "r2"
        for d in (d1, d2):
            d.mkdir()
            r = run_cli("reconstruct", "calogero", "--dt", "0.01",
                        "--out", str(d))
            assert r.returncode == 0, r.stderr
        assert ((d1 / "calogero_reconstructed.csv").read_bytes()
                == (d2 / "calogero_reconstructed.csv").read_bytes())
