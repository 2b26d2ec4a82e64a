import json

import pytest

from pdeltaflow.cli import (
    EXIT_CONDITION_FAILED,
    EXIT_INVALID_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    ConfigError,
    RunConfig,
    main,
)


def _write_cfg(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


QUICK = {
    "seed": 1,
    "domain": {"nx": 8, "ny": 8},
    "characteristics": {"samples": 10000},
    "embedding": {"iters": 30},
    "solver": {"levels": 2, "picard_tol": 1e-8},
}


class TestRunConfig:
    def test_roundtrip(self):
        c = RunConfig({"model": {"p": 1.5}, "seed": 7})
        assert RunConfig.parse(c.serialize()) == c

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig({"nonsense": True})
        with pytest.raises(ConfigError):
            RunConfig({"model": {"viscosity": 1.0}})

    def test_value_validation(self):
        with pytest.raises(ConfigError):
            RunConfig({"model": {"p": 0.5}})
        with pytest.raises(ConfigError):
            RunConfig({"domain": {"nx": 1}})
        with pytest.raises(ConfigError):
            RunConfig({"data": {"g2": ["x", "__import__('os')"]}})
        with pytest.raises(ConfigError):
            RunConfig({"characteristics": {"samples": 10}})

    def test_defaults_valid(self):
        RunConfig()


class TestExitCodes:
    def test_invalid_config_file(self, tmp_path):
        path = _write_cfg(tmp_path, "bad.json", {"model": {"p": 0.5}})
        assert main(["certify", "--config", path]) == EXIT_INVALID_CONFIG

    def test_check_tensor_pass(self, tmp_path):
        cfg = dict(QUICK, out=str(tmp_path / "t"), model={"p": 2.0, "delta": 0.0, "mu0": 0.0, "mu": 1.0})
        path = _write_cfg(tmp_path, "c.json", cfg)
        assert main(["check-tensor", "--config", path]) == EXIT_OK
        rep = json.loads((tmp_path / "t" / "tensor_report.json").read_text())
        assert rep["verdict"] == "pass"
        assert abs(rep["characteristics"]["C1"] - 1.0) < 1e-10

    def test_check_tensor_power_law(self, tmp_path):
        cfg = dict(QUICK, out=str(tmp_path / "t"), model={"p": 1.5, "delta": 0.1, "mu0": 0.0, "mu": 1.0})
        path = _write_cfg(tmp_path, "c.json", cfg)
        assert main(["check-tensor", "--config", path]) == EXIT_OK

    def test_certify_small_data(self, tmp_path):
        cfg = dict(QUICK, out=str(tmp_path / "t"))
        path = _write_cfg(tmp_path, "c.json", cfg)
        assert main(["certify", "--config", path]) == EXIT_OK
        rep = json.loads((tmp_path / "t" / "certificate.json").read_text())
        assert rep["satisfied"] and rep["R"] > 0

    def test_certify_zero_data(self, tmp_path):
        # delta = 0 so the offset-weighted shear norm vanishes with the data
        cfg = dict(QUICK, out=str(tmp_path / "t"), model={"p": 1.8, "delta": 0.0, "mu0": 0.0, "mu": 1.0})
        cfg["data"] = {"g1": "0", "g2": ["0", "0"], "f": ["0", "0"]}
        path = _write_cfg(tmp_path, "c.json", cfg)
        assert main(["certify", "--config", path]) == EXIT_OK
        rep = json.loads((tmp_path / "t" / "certificate.json").read_text())
        assert rep["satisfied"] and rep["R"] == 0.0

    def test_certify_large_data_fails(self, tmp_path):
        cfg = dict(QUICK, out=str(tmp_path / "t"))
        cfg["data"] = {
            "g1": "0",
            "g2": ["8 * pi * sin(pi*x) * cos(pi*y)", "-8 * pi * cos(pi*x) * sin(pi*y)"],
            "f": ["0", "0"],
        }
        path = _write_cfg(tmp_path, "c.json", cfg)
        assert main(["certify", "--config", path]) == EXIT_CONDITION_FAILED

    def test_certify_incompatible_data(self, tmp_path):
        cfg = dict(QUICK, out=str(tmp_path / "t"))
        cfg["data"] = {"g1": "1", "g2": ["0", "0"], "f": ["0", "0"]}
        path = _write_cfg(tmp_path, "c.json", cfg)
        assert main(["certify", "--config", path]) == EXIT_NUMERICAL
        rep = json.loads((tmp_path / "t" / "certificate.json").read_text())
        assert "error" in rep

    def test_solve_refused_then_override(self, tmp_path):
        cfg = dict(QUICK, out=str(tmp_path / "t"))
        cfg["data"] = {
            "g1": "0",
            "g2": ["6 * pi * sin(pi*x) * cos(pi*y)", "-6 * pi * cos(pi*x) * sin(pi*y)"],
            "f": ["0", "0"],
        }
        cfg["solver"] = {"levels": 1, "picard_tol": 1e-7, "picard_max": 80}
        path = _write_cfg(tmp_path, "c.json", cfg)
        assert main(["solve", "--config", path]) == EXIT_CONDITION_FAILED
        rep = json.loads((tmp_path / "t" / "solve_report.json").read_text())
        assert "refused" in rep
        assert main(["solve", "--config", path, "--override-certification"]) == EXIT_OK

    def test_solve_certified(self, tmp_path):
        cfg = dict(QUICK, out=str(tmp_path / "t"))
        path = _write_cfg(tmp_path, "c.json", cfg)
        assert main(["solve", "--config", path]) == EXIT_OK
        hist = (tmp_path / "t" / "solve_history.csv").read_text().strip().splitlines()
        assert hist[0] == "n,iters,residual,penalty_norm,norm_Du_p,norm_Du_q"
        assert len(hist) == 3
        rep = json.loads((tmp_path / "t" / "solve_report.json").read_text())
        assert rep["bound_ok"] and rep["penalty_ok"]

    def test_counterexample(self, tmp_path):
        cfg = {
            "seed": 1,
            "out": str(tmp_path / "t"),
            "counterexample": {"levels": 3, "n_values": [4, 12, 16, 24]},
        }
        path = _write_cfg(tmp_path, "c.json", cfg)
        assert main(["counterexample", "--config", path]) == EXIT_OK
        rep = json.loads((tmp_path / "t" / "counterexample.json").read_text())
        assert rep["negativity_exhibited"] and rep["N0"] is not None

    def test_counterexample_shallow_family(self, tmp_path):
        cfg = {"out": str(tmp_path / "t"), "counterexample": {"levels": 1}}
        path = _write_cfg(tmp_path, "c.json", cfg)
        assert main(["counterexample", "--config", path]) == EXIT_NUMERICAL

    def test_verify_lemmas(self, tmp_path):
        cfg = dict(QUICK, out=str(tmp_path / "t"))
        path = _write_cfg(tmp_path, "c.json", cfg)
        assert main(["verify-lemmas", "--config", path]) == EXIT_OK
        rep = json.loads((tmp_path / "t" / "lemma_report.json").read_text())
        assert rep["all_pass"]

    def test_lift_command(self, tmp_path):
        cfg = dict(QUICK, out=str(tmp_path / "t"))
        path = _write_cfg(tmp_path, "c.json", cfg)
        assert main(["lift", "--config", path]) == EXIT_OK
        rep = json.loads((tmp_path / "t" / "lift_report.json").read_text())
        assert rep["div_defect"] <= 1e-8
        assert (tmp_path / "t" / "lift_g.txt").exists()


def test_reports_deterministic(tmp_path):
    cfg = dict(QUICK)
    path = _write_cfg(tmp_path, "c.json", cfg)
    for cmd in ("check-tensor", "certify"):
        out_a = str(tmp_path / f"{cmd}-a")
        out_b = str(tmp_path / f"{cmd}-b")
        assert main([cmd, "--config", path, "--out", out_a]) == EXIT_OK
        assert main([cmd, "--config", path, "--out", out_b]) == EXIT_OK
        name = "tensor_report.json" if cmd == "check-tensor" else "certificate.json"
        assert (tmp_path / f"{cmd}-a" / name).read_bytes() == (tmp_path / f"{cmd}-b" / name).read_bytes()
