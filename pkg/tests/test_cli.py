import json

import numpy as np
import pytest

from scoreclimb import cli
from scoreclimb.config import PRESETS, read_config_file, resolve_config
from scoreclimb.errors import ConfigurationError
from scoreclimb.verification import CheckResult


class TestConfigFile:
    def test_empty_file_with_env_flag_uses_pendulum_preset(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("")
        run = resolve_config(path, {"environment.name": "pendulum"})
        assert run.train.eta == pytest.approx(5e-2)
        assert run.train.step_base == pytest.approx(1e-2)
        assert run.train.particles == 256
        assert run.train.backward_samples == 30

    def test_cartpole_preset(self):
        run = resolve_config(None, {"environment.name": "cartpole"})
        assert run.train.eta == pytest.approx(1e-1)
        assert run.train.step_base == pytest.approx(1e-3)

    def test_double_pendulum_preset(self):
        run = resolve_config(None, {"environment.name": "double_pendulum"})
        assert run.train.eta == pytest.approx(5e-3)
        assert run.train.particles == PRESETS["double_pendulum"]["particles"]

    def test_file_values_override_preset(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "[environment]\nname = pendulum\n"
            "[training]\neta = 0.25  # comment\nparticles = 64\n")
        run = resolve_config(path)
        assert run.train.eta == pytest.approx(0.25)
        assert run.train.particles == 64
        assert run.train.step_base == pytest.approx(1e-2)  # still preset

    def test_flag_overrides_beat_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("[training]\neta = 0.25\n")
        run = resolve_config(path, {"training.eta": "0.5"})
        assert run.train.eta == pytest.approx(0.5)

    def test_unknown_key_fatal_with_line_number(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("[training]\nlearning_rate = 0.1\n")
        with pytest.raises(ConfigurationError, match=r":2"):
            read_config_file(path)

    def test_unknown_section_fatal(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("[optimizer]\n")
        with pytest.raises(ConfigurationError):
            read_config_file(path)

    def test_duplicate_key_fatal(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("[training]\neta = 0.1\neta = 0.2\n")
        with pytest.raises(ConfigurationError):
            read_config_file(path)

    def test_key_outside_section_fatal(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("eta = 0.1\n")
        with pytest.raises(ConfigurationError):
            read_config_file(path)

    def test_bad_value_reports_key(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("[training]\nparticles = many\n")
        with pytest.raises(ConfigurationError, match="particles"):
            resolve_config(path)

    def test_unknown_override_key_fatal(self):
        with pytest.raises(ConfigurationError):
            resolve_config(None, {"training.momentum": "0.9"})

    def test_environment_overrides_flow_through(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("[environment]\nname = pendulum\ndamping = 0.2\n"
                        "action_limit = 3.0\n")
        run = resolve_config(path)
        assert run.train.env_overrides == {"damping": 0.2, "action_limit": 3.0}

    def test_optional_values(self):
        run = resolve_config(None, {"training.score_clip": "none",
                                    "training.log_std_bounds": "-1.0,0.5"})
        assert run.train.score_clip is None
        assert run.train.log_std_bounds == (-1.0, 0.5)


def _smoke_args(tmp_path, iters=2):
    return ["--seed", "0", "--output-dir", str(tmp_path),
            "--set", f"training.iterations={iters}",
            "--set", "training.particles=4",
            "--set", "training.backward_samples=2",
            "--set", "training.horizon=5",
            "--set", "training.eval_rollouts=2",
            "--set", "policy.hidden_layers=4"]


class TestTrainCommand:
    def test_writes_curve_checkpoint_and_figure(self, tmp_path, capsys):
        code = cli.main(["train", *_smoke_args(tmp_path)])
        assert code == cli.EXIT_OK
        out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        curve = tmp_path / "learning_curve.csv"
        assert curve.exists() and out["curve"] == str(curve)
        assert (tmp_path / "policy.bin").exists()
        assert (tmp_path / "learning_curve.png").stat().st_size > 0
        # header plus one row per evaluation (iterations 0, 1, 2)
        assert len(curve.read_text().splitlines()) == 4

    def test_requires_seed(self, tmp_path):
        args = _smoke_args(tmp_path)
        args.remove("--seed")
        args.remove("0")
        assert cli.main(["train", *args]) == cli.EXIT_CONFIG

    def test_bad_override_is_config_error(self, tmp_path):
        code = cli.main(["train", *_smoke_args(tmp_path),
                         "--set", "training.bogus=1"])
        assert code == cli.EXIT_CONFIG

    def test_diverging_dynamics_is_numerical_error(self, tmp_path):
        # a step size at the float ceiling overflows the very first Euler
        # update, which must surface as a numerical failure, not a crash
        code = cli.main(["train", *_smoke_args(tmp_path),
                         "--set", "environment.dt=1e308"])
        assert code == cli.EXIT_NUMERICAL


class TestEvalCommand:
    def test_json_summary(self, tmp_path, capsys):
        assert cli.main(["train", *_smoke_args(tmp_path)]) == cli.EXIT_OK
        capsys.readouterr()
        out_file = tmp_path / "summary.json"
        code = cli.main(["eval", "--seed", "0",
                         "--checkpoint", str(tmp_path / "policy.bin"),
                         "--rollouts", "3",
                         "--set", "training.horizon=5",
                         "--output", str(out_file)])
        assert code == cli.EXIT_OK
        printed = json.loads(capsys.readouterr().out.strip())
        stored = json.loads(out_file.read_text())
        assert printed == stored
        assert printed["n_rollouts"] == 3
        assert np.isfinite(printed["mean_cost"]) and printed["mean_cost"] > 0


class TestVerifyCommand:
    def test_all_pass_exits_zero(self, monkeypatch, capsys):
        monkeypatch.setattr(
            "scoreclimb.verification.ALL_CHECKS",
            (lambda: CheckResult("stub-pass", True, "ok"),))
        assert cli.main(["verify"]) == cli.EXIT_OK
        assert "[PASS] stub-pass" in capsys.readouterr().out

    def test_any_failure_exits_three(self, monkeypatch, capsys):
        monkeypatch.setattr(
            "scoreclimb.verification.ALL_CHECKS",
            (lambda: CheckResult("stub-pass", True, "ok"),
             lambda: CheckResult("stub-fail", False, "off by 2")))
        assert cli.main(["verify"]) == cli.EXIT_VERIFY
        assert "[FAIL] stub-fail" in capsys.readouterr().out

    def test_crashing_check_counts_as_failure(self, monkeypatch):
        def boom():
            raise RuntimeError("kaput")
        monkeypatch.setattr("scoreclimb.verification.ALL_CHECKS", (boom,))
        assert cli.main(["verify"]) == cli.EXIT_VERIFY


class TestReportCommand:
    def test_renders_figure_from_curves(self, tmp_path, capsys):
        assert cli.main(["train", *_smoke_args(tmp_path)]) == cli.EXIT_OK
        capsys.readouterr()
        fig = tmp_path / "fig.png"
        code = cli.main(["report", str(tmp_path / "learning_curve.csv"),
                         "--output", str(fig), "--x-axis", "interactions",
                         "--title", "smoke"])
        assert code == cli.EXIT_OK
        assert json.loads(capsys.readouterr().out.strip())["figure"] == str(fig)
        assert fig.stat().st_size > 0

    def test_malformed_csv_is_config_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        code = cli.main(["report", str(bad),
                         "--output", str(tmp_path / "fig.png")])
        assert code == cli.EXIT_CONFIG
