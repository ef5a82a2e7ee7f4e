import json
import os

import pytest

from muskat.cli import cmd_run, cmd_sweep, main, parse_config, ConfigError


def base_config(outdir, **overrides):
    cfg = {
        "params": {
            "eps": 0.1,
            "delta": 0.25,
            "nu": 4.0,
            "n_modes": 8,
            "m_nodes": 16,
            "dt": 0.01,
            "t_final": 0.2,
        },
        "initial": {"modes": [[1, 1e-4, 0.0]]},
        "output": {"directory": str(outdir), "interval": 0.05},
    }
    cfg.update(overrides)
    return cfg


class TestConfig:
    def test_unknown_key_rejected(self, tmp_path):
        cfg = base_config(tmp_path)
        cfg["params"]["spice"] = 1.0
        with pytest.raises(ConfigError):
            parse_config(cfg)

    def test_unknown_top_level_rejected(self, tmp_path):
        cfg = base_config(tmp_path)
        cfg["extras"] = {}
        with pytest.raises(ConfigError):
            parse_config(cfg)

    def test_requires_exactly_one_source(self, tmp_path):
        cfg = base_config(tmp_path)
        cfg["initial"]["checkpoint"] = "x.bin"
        with pytest.raises(ConfigError):
            parse_config(cfg)
        del cfg["initial"]["modes"]
        del cfg["initial"]["checkpoint"]
        with pytest.raises(ConfigError):
            parse_config(cfg)

    def test_config_error_exit_code(self, tmp_path):
        cfg = base_config(tmp_path)
        cfg["params"]["eps"] = -1.0
        assert cmd_run(cfg) == 2


class TestRunCommand:
    def test_outputs_written(self, tmp_path):
        out = tmp_path / "out"
        assert cmd_run(base_config(out)) == 0
        assert sorted(os.listdir(out)) == ["checkpoint.bin", "ledger.csv", "summary.json"]
        summary = json.loads((out / "summary.json").read_text())
        assert summary["verdict"] == "stable-decay"
        assert summary["completed"]
        assert summary["decay_rate"] > summary["rate_guaranteed"]
        assert summary["energy_monotone"]

    def test_zero_initial_data(self, tmp_path):
        out = tmp_path / "zero"
        cfg = base_config(out)
        cfg["initial"] = {"modes": []}
        assert cmd_run(cfg) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["final_norms"]["h_s1"] == 0.0

    def test_deterministic_outputs(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert cmd_run(base_config(a)) == 0
        assert cmd_run(base_config(b)) == 0
        assert (a / "ledger.csv").read_bytes() == (b / "ledger.csv").read_bytes()
        assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()

    def test_rt_unstable_linear_run(self, tmp_path):
        out = tmp_path / "rt"
        cfg = base_config(out)
        cfg["params"]["nu"] = 1.5
        cfg["flags"] = {"linear_only": True, "override_smallness": True}
        assert cmd_run(cfg) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["verdict"] == "RT-unstable regime"
        assert summary["decay_rate"] < 0  # growth

    def test_pinch_off_exit_code(self, tmp_path):
        out = tmp_path / "pinch"
        cfg = base_config(out)
        cfg["params"].update(nu=1.5, eps=0.9, dt=0.05, t_final=400.0)
        cfg["initial"] = {"modes": [[1, 0.12, 0.0]]}
        cfg["flags"] = {"linear_only": True, "override_smallness": True}
        assert cmd_run(cfg) == 3
        assert (out / "ledger.csv").exists()  # partial outputs flushed

    def test_resume_from_checkpoint(self, tmp_path):
        out = tmp_path / "first"
        assert cmd_run(base_config(out)) == 0
        out2 = tmp_path / "second"
        cfg = base_config(out2)
        cfg["initial"] = {"checkpoint": str(out / "checkpoint.bin")}
        assert cmd_run(cfg) == 0


class TestVerifyCommand:
    def test_smoke_pass(self, tmp_path, capsys):
        rc = main(["verify", "--trials", "1", "--seed", "7", "--outdir", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "constants.csv").exists()
        text = (tmp_path / "constants.csv").read_text()
        assert text.splitlines()[0].startswith("# generator=philox seed=")
        assert text.splitlines()[1] == "inequality_id,statement,trials,max_ratio,empirical_constant"

    def test_reproducible_report(self, tmp_path):
        main(["verify", "--trials", "1", "--seed", "7", "--outdir", str(tmp_path / "a")])
        main(["verify", "--trials", "1", "--seed", "7", "--outdir", str(tmp_path / "b")])
        assert (tmp_path / "a/constants.csv").read_bytes() == (
            tmp_path / "b/constants.csv"
        ).read_bytes()

    def test_trials_guard(self):
        assert main(["verify", "--trials", "0"]) == 2


class TestSweepCommand:
    def test_grid_rows_and_stability_flip(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MUSKAT_WORKERS", "1")
        cfg = base_config(tmp_path / "ignored")
        cfg["flags"] = {"linear_only": True, "override_smallness": True}
        cfg["sweep"] = {"delta": [0.04, 0.25, 0.64], "nu": [1.5]}
        rc = cmd_sweep(cfg, directory=str(tmp_path / "sweep"))
        assert rc == 0
        lines = (tmp_path / "sweep" / "sweep.csv").read_text().strip().splitlines()
        assert len(lines) == 4  # header + one row per grid point
        header = lines[0].split(",")
        vcol = header.index("verdict")
        verdicts = [line.split(",")[vcol] for line in lines[1:]]
        # nu sqrt(delta) = 0.3, 0.75, 1.2: flips to stable at the end
        assert verdicts[0] == "RT-unstable regime"
        assert verdicts[1] == "RT-unstable regime"
        assert verdicts[2] == "stable-decay"

    def test_single_point_equals_run(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MUSKAT_WORKERS", "1")
        out_run = tmp_path / "direct"
        assert cmd_run(base_config(out_run)) == 0
        cfg = base_config(tmp_path / "ignored")
        cfg["sweep"] = {"nu": [4.0]}
        assert cmd_sweep(cfg, directory=str(tmp_path / "sw")) == 0
        direct = json.loads((out_run / "summary.json").read_text())
        point = json.loads((tmp_path / "sw" / "point_0000" / "summary.json").read_text())
        assert point["decay_rate"] == direct["decay_rate"]

    def test_empty_grid_rejected(self, tmp_path):
        cfg = base_config(tmp_path)
        cfg["sweep"] = {"nu": []}
        assert cmd_sweep(cfg, directory=str(tmp_path / "sw")) == 2


class TestConvertCommand:
    def test_reference_values(self, tmp_path, capsys):
        path = tmp_path / "phys.json"
        path.write_text(
            json.dumps(
                {
                    "depth": 0.5,
                    "width": 1.0,
                    "amplitude": 0.05,
                    "gamma": 10.0,
                    "rho": 1.0,
                    "gravity": 1.0,
                }
            )
        )
        rc = main(["convert", str(path), "--h0-norm", "1e-6"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["nu"] == pytest.approx(20.0)
        assert out["dimensional_checks"]["initial_amplitude"]["passed"]

    def test_invalid_physical_params(self, tmp_path):
        path = tmp_path / "phys.json"
        path.write_text(json.dumps({"depth": 2.0, "width": 1.0, "amplitude": 0.1,
                                    "gamma": 1.0, "rho": 1.0, "gravity": 1.0}))
        assert main(["convert", str(path)]) == 2


class TestRadiusCommand:
    def test_radius_of_checkpoint(self, tmp_path, capsys):
        out = tmp_path / "out"
        cmd_run(base_config(out))
        rc = main(["radius", str(out / "checkpoint.bin")])
        assert rc == 0
        data = json.loads(capsys.readouterr().out)
        assert data["radius"] > 0.0


class TestOverridesAndReports:
    def test_cli_flag_overrides(self, tmp_path):
        path = tmp_path / "cfg.json"
        cfg = base_config(tmp_path / "out")
        path.write_text(json.dumps(cfg))
        rc = main(
            [
                "run",
                str(path),
                "--outdir",
                str(tmp_path / "out2"),
                "--nu",
                "1.5",
                "--t-final",
                "0.1",
                "--linear-only",
                "--override-smallness",
            ]
        )
        assert rc == 0
        summary = json.loads((tmp_path / "out2" / "summary.json").read_text())
        assert summary["verdict"] == "RT-unstable regime"
        assert summary["final_t"] == pytest.approx(0.1)

    def test_verify_writes_kernel_report(self, tmp_path):
        assert main(["verify", "--trials", "1", "--seed", "3", "--outdir", str(tmp_path)]) == 0
        lines = (tmp_path / "kernels.csv").read_text().strip().splitlines()
        assert lines[0] == "kappa,j,l,branch,bound,measured,ratio"
        assert len(lines) == 1 + 4 * 8 * 2  # 4 scales x 8 orders x 2 branches
        for line in lines[1:]:
            assert float(line.split(",")[-1]) <= 1.0

    def test_verify_violation_exit_code(self, tmp_path, monkeypatch):
        import muskat.cli as cli_mod
        from muskat.errors import InequalityViolation

        def broken(seed, trials):
            raise InequalityViolation(
                "synthetic", inequality_id="x", counterexample={"seed": seed}
            )

        monkeypatch.setattr(cli_mod, "constants_lab", broken)
        rc = main(["verify", "--trials", "1", "--outdir", str(tmp_path)])
        assert rc == 4
        assert (tmp_path / "counterexample.json").exists()

    def test_sweep_clamps_mu_across_stability(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MUSKAT_WORKERS", "1")
        cfg = base_config(tmp_path / "ignored")
        cfg["params"]["mu"] = 0.01
        cfg["flags"] = {"linear_only": True, "override_smallness": True}
        cfg["sweep"] = {"nu": [1.5, 4.0]}
        assert cmd_sweep(cfg, directory=str(tmp_path / "sw")) == 0
        lines = (tmp_path / "sw" / "sweep.csv").read_text().strip().splitlines()
        exits = [line.split(",")[2] for line in lines[1:]]
        assert exits == ["0", "0"]

    def test_sweep_amplitude_axis(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MUSKAT_WORKERS", "1")
        cfg = base_config(tmp_path / "ignored")
        cfg["sweep"] = {"amplitude": [1e-5, 1e-4]}
        assert cmd_sweep(cfg, directory=str(tmp_path / "sw")) == 0
        lines = (tmp_path / "sw" / "sweep.csv").read_text().strip().splitlines()
        assert len(lines) == 3
        s0 = json.loads((tmp_path / "sw" / "point_0000" / "summary.json").read_text())
        s1 = json.loads((tmp_path / "sw" / "point_0001" / "summary.json").read_text())
        assert s0["initial_norm"] == pytest.approx(1e-5)
        assert s1["initial_norm"] == pytest.approx(1e-4)
