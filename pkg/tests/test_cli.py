import json
import subprocess
import sys

import pytest

from integrability.cli import ExperimentConfig, dump_json, main

CD = {"family": "cobb_douglas", "n": 2, "params": {"a": [0.5, 0.5]}}


def run(tmp_path, command, config, *extra, name="out"):
    prefix = str(tmp_path / name)
    code = main([command, "--config-json", json.dumps(config), "--out", prefix, *extra])
    return code, prefix


def report(prefix):
    return json.loads(open(f"{prefix}.report.json").read())


class TestCommands:
    def test_check(self, tmp_path):
        code, prefix = run(tmp_path, "check", {"demand": CD, "parameters": {"samples": 50}})
        rep = report(prefix)
        assert code == 0 and rep["command"] == "check"
        assert rep["result"]["passed"] is True
        assert rep["result"]["range"]["full_dimensional"] is True

    def test_check_quasilinear_uses_kink_exclusion(self, tmp_path):
        cfg = {"demand": {"family": "quasilinear_sqrt", "n": 2}, "parameters": {"samples": 100}}
        code, prefix = run(tmp_path, "check", cfg)
        res = report(prefix)["result"]
        assert code == 0 and res["passed"] and res["slutsky"]["excluded_near_kink"] > 0

    def test_recover_single_writes_path(self, tmp_path):
        cfg = {"demand": {"family": "quasilinear_sqrt", "n": 2}, "parameters": {"x": [1.0, 0.0]}}
        code, prefix = run(tmp_path, "recover", cfg)
        res = report(prefix)["result"]
        assert code == 0 and res["u"] == pytest.approx(0.75, abs=1e-8) and res["in_range"]
        lines = open(f"{prefix}.path.csv").read().splitlines()
        assert lines[0].startswith("# config_hash=") and lines[1] == "t,c"

    def test_recover_many(self, tmp_path):
        cfg = {"demand": CD, "parameters": {"x": [[1.0, 1.0], [2.0, 0.5]], "pbar": [1.0, 2.0]}}
        code, prefix = run(tmp_path, "recover", cfg)
        assert code == 0 and len(report(prefix)["result"]["results"]) == 2

    def test_expenditure(self, tmp_path):
        cfg = {"demand": CD, "parameters": {"base": {"p": [1.0, 1.0], "m": 1.0}, "q": [4.0, 1.0]}}
        code, prefix = run(tmp_path, "expenditure", cfg)
        assert code == 0 and report(prefix)["result"]["E"] == pytest.approx(2.0, rel=1e-9)

    def test_metric(self, tmp_path):
        cfg = {"demand": CD, "parameters": {"other": {"family": "leontief", "n": 2}, "nu_max": 3,
                                            "points_per_axis": 5}}
        code, prefix = run(tmp_path, "metric", cfg)
        res = report(prefix)["result"]
        assert code == 0 and res["rho"] > 0 and len(res["sups"]) == 3

    def test_converge(self, tmp_path):
        cfg = {"demand": {"family": "ces", "n": 2, "params": {"sigma": -1.0}},
               "parameters": {"sequence": {"ces_sigma": [-2.0, -1.5]}, "k": [1, 2], "points_per_axis": 2}}
        code, prefix = run(tmp_path, "converge", cfg)
        assert code == 0
        lines = open(f"{prefix}.table.csv").read().splitlines()
        assert lines[1] == "k,sup_error,not_in_range_count" and len(lines) == 4

    def test_rp_check(self, tmp_path):
        code, prefix = run(tmp_path, "rp-check", {"demand": CD, "parameters": {"samples": 10, "chains": 10}})
        res = report(prefix)["result"]
        assert code == 0 and res["weak"]["violations"] == [] and res["strong"]["violations"] == []

    def test_module_entry_point(self, tmp_path):
        out = subprocess.run(
            [sys.executable, "-m", "integrability", "expenditure", "--config-json",
             json.dumps({"demand": CD, "parameters": {"q": [2.0, 2.0]}}), "--out", str(tmp_path / "e")],
            capture_output=True, text=True)
        assert out.returncode == 0 and out.stdout.strip().endswith("e.path.csv")


class TestErrors:
    def test_unknown_family(self, tmp_path, capsys):
        code, _ = run(tmp_path, "check", {"demand": {"family": "nope", "n": 2}})
        err = json.loads(capsys.readouterr().err)
        assert code == 1 and err["error"] == "validation"

    def test_bad_json(self, capsys):
        assert main(["check", "--config-json", "{not json"]) == 1

    def test_missing_parameter(self, tmp_path):
        assert run(tmp_path, "expenditure", {"demand": CD})[0] == 1

    def test_command_mismatch(self, tmp_path):
        assert run(tmp_path, "check", {"command": "metric", "demand": CD})[0] == 1

    def test_numerical_failure(self, tmp_path, capsys):
        cfg = {"demand": CD, "parameters": {"base": {"p": [1.0, 1.0], "m": 1.0}, "q": [1e12, 1e12]}}
        code, _ = run(tmp_path, "expenditure", cfg)
        err = json.loads(capsys.readouterr().err)
        assert code == 2 and err["status"] == "ExitHighIncome"


class TestReproducibility:
    CFG = {"demand": CD, "parameters": {"samples": 20, "chains": 10}, "seed": 3}

    def test_byte_identical(self, tmp_path):
        _, a = run(tmp_path, "rp-check", self.CFG, name="a")
        _, b = run(tmp_path, "rp-check", self.CFG, name="b")
        assert open(f"{a}.report.json").read() == open(f"{b}.report.json").read()

    def test_seed_override_changes_hash(self, tmp_path):
        _, a = run(tmp_path, "rp-check", self.CFG, name="a")
        _, b = run(tmp_path, "rp-check", self.CFG, "--seed", "9", name="b")
        ra, rb = report(a), report(b)
        assert ra["seed"] == 3 and rb["seed"] == 9
        assert ra["config_hash"] != rb["config_hash"]

    def test_hash_ignores_key_order(self):
        a = ExperimentConfig.from_json("check", {"demand": CD, "seed": 1})
        b = ExperimentConfig.from_json("check", {"seed": 1, "demand": CD})
        assert a.config_hash == b.config_hash

    def test_threads_do_not_change_output(self, tmp_path):
        cfg = {"demand": CD, "parameters": {"x": [[1.0, 1.0], [2.0, 0.5], [0.3, 3.0]]}}
        _, a = run(tmp_path, "recover", cfg, name="a")
        _, b = run(tmp_path, "recover", cfg, "--threads", "3", name="b")
        assert open(f"{a}.report.json").read() == open(f"{b}.report.json").read()

    def test_float_format(self):
        assert dump_json({"b": 0.1, "a": float("nan")}) == '{"a": null, "b": 0.10000000000000001}\n'
