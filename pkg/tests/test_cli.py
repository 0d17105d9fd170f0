"""
Tests for the command-line front-end: exit codes, output routing and flags.
"""
import json

import pytest

from app.cli import EXIT_CONFIG, EXIT_MODEL, EXIT_OK, EXIT_VERIFICATION, build_parser, main, settings_from_args
from app.services.tensor_core import make_isotropic_elastic
from tests.conftest import CONFIG_DIR, job, load_example


def _config(name: str) -> str:
    return str(CONFIG_DIR / name)


class TestAnalysisCommands:
    """Tests for inertia, ctilde, homogenize and classify."""

    def test_homogenize_json(self, capsys):
        """homogenize prints the JSON report and exits 0."""
        assert main(["homogenize", "--config", _config("rect_circle.json")]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["params"]["a4"][0] == pytest.approx(9.8175e-4, rel=1e-4)
        assert report["verification"]["passed"] is True

    def test_homogenize_csv(self, capsys):
        """--format csv prints the condensed A_eq."""
        assert main(["homogenize", "--config", _config("rect_circle.json"), "--format", "csv"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "row,c0,c1,c2,c3,c4,c5"

    def test_output_file(self, capsys, tmp_path):
        """--output writes the report to a file and nothing to stdout."""
        target = tmp_path / "report.json"
        assert main(["homogenize", "--config", _config("rect_circle.json"), "--output", str(target)]) == EXIT_OK
        assert capsys.readouterr().out == ""
        assert json.loads(target.read_text())["config"]["model"] == "rect_circle"

    def test_ctilde_erratum_flag(self, capsys):
        """--erratum-sign-3d silences the sphere sign warning."""
        assert main(["ctilde", "--config", _config("box_sphere_soft.json"), "--erratum-sign-3d"]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["warnings"] == []
        assert report["ctilde"]["negative_definite"] is True

    def test_ctilde_literal_sign_warns(self, capsys):
        """Without the flag the warning is part of the report."""
        assert main(["ctilde", "--config", _config("box_sphere_soft.json")]) == EXIT_OK
        codes = [w["code"] for w in json.loads(capsys.readouterr().out)["warnings"]]
        assert "sphere_sign_conflict" in codes

    def test_classify(self, capsys):
        """classify reports the symmetry class of the elliptical void."""
        assert main(["classify", "--config", _config("square_ellipse.json")]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["symmetry"]["aeq"] == "orthotropic"
        assert report["definiteness"]["positive_definite"] is True

    def test_inertia_monte_carlo(self, capsys, monkeypatch):
        """--monte-carlo samples as many points as the settings say."""
        monkeypatch.setenv("SGEHOM_MC_SAMPLES", "20000")
        assert main(["inertia", "--config", _config("circle_void.json"), "--monte-carlo"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["inertia"]["method"] == "monte_carlo"

    def test_rerun_is_byte_identical(self, capsys):
        """Two runs print the same bytes."""
        main(["homogenize", "--config", _config("explicit_ctilde.json")])
        first = capsys.readouterr().out
        main(["homogenize", "--config", _config("explicit_ctilde.json")])
        assert capsys.readouterr().out == first


class TestExitCodes:
    """Tests for the documented exit codes."""

    def test_missing_config_file(self):
        """An unreadable config exits 1."""
        assert main(["homogenize", "--config", "/nonexistent/job.json"]) == EXIT_CONFIG

    def test_invalid_config(self, write_config):
        """A schema violation exits 1."""
        assert main(["homogenize", "--config", write_config(job(colour="red"))]) == EXIT_CONFIG

    def test_model_error(self, write_config):
        """A valid document the model rejects exits 2."""
        data = job(inclusion={"shape": {"kind": "ellipse", "b1": 0.2, "b2": 0.1}, "material": "void"})
        assert main(["homogenize", "--config", write_config(data)]) == EXIT_MODEL

    def test_verification_failure(self, capsys):
        """A corrupted A_eq fails verification and exits 3."""
        assert main(["verify", "--only", "annihilation", "--perturb-aeq"]) == EXIT_VERIFICATION
        assert json.loads(capsys.readouterr().out)["passed"] is False

    def test_missing_required_config(self):
        """Analysis commands need --config."""
        with pytest.raises(SystemExit) as exc_info:
            main(["homogenize"])
        assert exc_info.value.code == 2

    def test_version(self, capsys):
        """--version prints the version and exits 0."""
        with pytest.raises(SystemExit) as exc_info:
            main(["--version"])
        assert exc_info.value.code == 0
        assert "sgehom" in capsys.readouterr().out


class TestVerifyAndSweep:
    """Tests for the verify and sweep commands."""

    def test_verify_subset(self, capsys):
        """verify runs the named checks and exits 0."""
        assert main(["verify", "--only", "scaling", "--only", "inertia_sum_rule"]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert [c["name"] for c in report["checks"]] == ["inertia_sum_rule", "scaling"]

    def test_verify_job(self, capsys):
        """verify --config runs the checks of one job."""
        assert main(["verify", "--config", _config("square_crack.json")]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["passed"] is True

    def test_sweep_from_config(self, capsys):
        """sweep prints one CSV row per grid point."""
        assert main(["sweep", "--config", _config("sweep.json")]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "lambda_ratio,nu1,a2_norm,a4_norm,a6_norm"
        assert len(lines) == 1 + 4 * 6

    def test_sweep_invalid_grid(self, write_config):
        """A bad grid exits 1."""
        assert main(["sweep", "--config", write_config({"nu1": [0.7]}, "sweep.json")]) == EXIT_CONFIG


class TestSettingsFromArgs:
    """Tests for the flag and environment layering."""

    def test_environment_defaults(self, mock_env):
        """Unset flags fall back to the SGEHOM_ environment."""
        args = build_parser().parse_args(["verify"])
        settings = settings_from_args(args)
        assert settings.seed == 7
        assert settings.dilute_threshold == 0.01

    def test_flags_win(self, mock_env):
        """Explicit flags override the environment."""
        args = build_parser().parse_args(["verify", "--seed", "3", "--tol-fit", "1e-6", "--erratum-sign-3d"])
        settings = settings_from_args(args)
        assert settings.seed == 3
        assert settings.fit_tol == 1e-6
        assert settings.erratum_sign_3d is True

    def test_job_flags_override_cli(self, capsys, write_config):
        """Flags inside the job document take precedence over the command line."""
        data = load_example("box_sphere_soft.json")
        data["flags"] = {"erratum_sign_3d": False}
        main(["ctilde", "--config", write_config(data), "--erratum-sign-3d"])
        codes = [w["code"] for w in json.loads(capsys.readouterr().out)["warnings"]]
        assert "sphere_sign_conflict" in codes

    def test_tol_symmetry_flag_accepts_nearly_symmetric_ctilde(self, capsys, write_config):
        """--tol-symmetry decides whether an explicit C~ with a 5e-10 gap is usable."""
        c = make_isotropic_elastic(0.0, -1.0, 2).components.copy()
        c[0, 0, 0, 1] = 5e-10
        data = load_example("explicit_ctilde.json")
        data["ctilde"] = {"components": c.ravel().tolist()}
        del data["flags"]
        path = write_config(data)
        assert main(["ctilde", "--config", path]) == EXIT_CONFIG
        assert main(["ctilde", "--config", path, "--tol-symmetry", "1e-6"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["ctilde"]["negative_definite"] is True
