import json

import numpy as np
import pytest

from gpcbf import cli
from gpcbf.config import defaults, load_settings, settings_to_ini
from gpcbf.errors import ConfigError


class TestConfig:
    def test_defaults_reproduce_study_setup(self):
        st = defaults("pendulum")
        assert st.model.budget == 100 and st.model.local_budget == 50
        assert st.model.noise == 1.0 and st.model.kernel.bandwidth == 0.5
        assert st.sim.duration == 40.0
        st = defaults("robot")
        assert st.model.noise == 0.5 and st.model.kernel.bandwidth == 0.1
        assert st.sim.duration == 60.0
        assert st.params.slack_weight == 2.0

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError):
            defaults("quadrotor")
        with pytest.raises(ConfigError):
            load_settings(scenario="synthetic")

    def test_file_overrides(self, tmp_path):
        path = tmp_path / "cfg.ini"
        path.write_text("""
[run]
scenario = pendulum
case = 2
seed = 11
[model]
budget = 40
local_budget = 20
kernel_bandwidth = 0.7
[sim]
duration = 1.5
[pendulum]
torque_max = 0.5
x0 = 0.2 0.1
""")
        st = load_settings(config_path=path)
        assert st.scenario == "pendulum" and st.case == 2 and st.seed == 11
        assert st.model.budget == 40 and st.model.kernel.bandwidth == 0.7
        assert st.sim.duration == 1.5 and st.sim.seed == 11
        assert st.params.torque_max == 0.5
        assert st.params.x0 == (0.2, 0.1)

    def test_cli_args_override_file(self, tmp_path):
        path = tmp_path / "cfg.ini"
        path.write_text("[run]\nscenario = pendulum\ncase = 2\nseed = 11\n")
        st = load_settings(scenario="pendulum", case=3, seed=5, config_path=path)
        assert st.case == 3 and st.seed == 5

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.ini"
        path.write_text("[model]\nbudgett = 40\n[run]\nscenario = pendulum\n")
        with pytest.raises(ConfigError):
            load_settings(config_path=path)

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "cfg.ini"
        path.write_text("[run]\nscenario = pendulum\n[turbines]\nn = 3\n")
        with pytest.raises(ConfigError):
            load_settings(config_path=path)

    def test_mismatched_scenario_section_rejected(self, tmp_path):
        path = tmp_path / "cfg.ini"
        path.write_text("[run]\nscenario = pendulum\n[robot]\nmass = 11\n")
        with pytest.raises(ConfigError):
            load_settings(config_path=path)

    def test_seed_under_sim_rejected(self, tmp_path):
        path = tmp_path / "cfg.ini"
        path.write_text("[run]\nscenario = pendulum\n[sim]\nseed = 4\n")
        with pytest.raises(ConfigError):
            load_settings(config_path=path)

    def test_ini_round_trip(self, tmp_path):
        st = load_settings(scenario="robot", case=3, seed=17)
        text = settings_to_ini(st)
        path = tmp_path / "echo.ini"
        path.write_text(text)
        st2 = load_settings(config_path=path)
        assert st2.scenario == st.scenario and st2.case == st.case and st2.seed == st.seed
        assert st2.model == st.model
        assert st2.params == st.params
        assert st2.sim == st.sim

    def test_waypoint_list_parse(self, tmp_path):
        path = tmp_path / "cfg.ini"
        path.write_text("[run]\nscenario = robot\n[robot]\n"
                        "waypoints = 0.5 -0.3; 1.0 0.2\ngoal_radius = 0.2\n")
        st = load_settings(config_path=path)
        assert st.params.waypoints == ((0.5, -0.3), (1.0, 0.2))
        assert st.params.goal_radius == 0.2


class TestCli:
    def run_cli(self, *argv):
        return cli.main(list(argv))

    def test_unknown_scenario_exit_2(self, capsys):
        assert self.run_cli("run", "--scenario", "boat") == 2
        assert "error" in capsys.readouterr().err

    def test_missing_scenario_exit_2(self, capsys):
        assert self.run_cli("run") == 2

    def test_short_run_outputs(self, tmp_path, capsys):
        cfg = tmp_path / "short.ini"
        cfg.write_text("[sim]\nduration = 0.05\n")
        out = tmp_path / "out"
        code = self.run_cli("run", "--scenario", "pendulum", "--case", "1",
                            "--seed", "3", "--config", str(cfg), "--out", str(out))
        assert code == 0
        for name in ("trace.csv", "summary.json", "effective_config.ini",
                     "fig_states.csv", "fig_bound.csv"):
            assert (out / name).exists(), name
        summary = json.loads((out / "summary.json").read_text())
        assert summary["rows"] == 50
        assert summary["case"] == 1 and summary["scenario"] == "pendulum"

    def test_effective_config_reproduces_run(self, tmp_path):
        cfg = tmp_path / "short.ini"
        cfg.write_text("[sim]\nduration = 0.08\n[model]\nbudget = 30\nlocal_budget = 15\n")
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert self.run_cli("run", "--scenario", "robot", "--case", "2", "--seed", "7",
                            "--config", str(cfg), "--out", str(out1)) == 0
        assert self.run_cli("run", "--config", str(out1 / "effective_config.ini"),
                            "--out", str(out2)) == 0
        a = np.loadtxt(out1 / "trace.csv", delimiter=",", skiprows=1)
        b = np.loadtxt(out2 / "trace.csv", delimiter=",", skiprows=1)
        with open(out1 / "trace.csv") as fh:
            names = fh.readline().strip().split(",")
        keep = [i for i, n in enumerate(names) if n != "update_time"]
        np.testing.assert_array_equal(a[:, keep], b[:, keep])

    def test_default_out_dir_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path / "envout"))
        cfg = tmp_path / "short.ini"
        cfg.write_text("[sim]\nduration = 0.02\n")
        assert self.run_cli("run", "--scenario", "pendulum", "--config", str(cfg)) == 0
        assert (tmp_path / "envout" / "pendulum_case1" / "trace.csv").exists()

    def test_sim_failure_exit_3_partial_trace(self, tmp_path, monkeypatch, capsys):
        # force divergence through an absurd kernel bound making the filter blow up
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[sim]\nduration = 0.5\n")
        import gpcbf.simulator as simmod
        from gpcbf.errors import SimulationFailure

        real_run = simmod.run

        def failing_run(*a, **kw):
            trace = real_run(a[0], a[1], model_config=kw.get("model_config"),
                             sim_config=type(kw["sim_config"])(duration=0.01, seed=0))
            raise SimulationFailure("forced", trace=trace)

        monkeypatch.setattr(simmod, "run", failing_run)
        out = tmp_path / "failed"
        code = self.run_cli("run", "--scenario", "pendulum", "--config", str(cfg),
                            "--out", str(out))
        assert code == 3
        assert (out / "trace.csv").exists()

    def test_bench_smoke(self, tmp_path, capsys):
        code = self.run_cli("bench", "--budgets", "12,16", "--steps", "5",
                            "--out", str(tmp_path))
        assert code == 0
        report = json.loads((tmp_path / "bench_report.json").read_text())
        assert report["budgets"] == [12, 16]
        assert "recursive_slope_top3" in report and "speedup_at_max" in report

    def test_bench_bad_budgets(self, capsys):
        assert self.run_cli("bench", "--budgets", "100,50") == 2
        assert self.run_cli("bench", "--budgets", "abc") == 2

    def test_verify_fast(self, capsys):
        assert self.run_cli("verify", "--fast") == 0
        out = capsys.readouterr().out
        assert out.count("[PASS]") == 4

    def test_verify_failure_exit_1(self, monkeypatch, capsys):
        import gpcbf.verify as vermod

        def failing(fast=False):
            return [vermod.SuiteResult("recursive-equivalence", False,
                                       {"max_rel_err": 1.0})]

        monkeypatch.setattr(vermod, "run_all", failing)
        assert self.run_cli("verify", "--fast") == 1
        assert "[FAIL]" in capsys.readouterr().out
