"""
Tests for the sweep service.
"""
import math

import pytest

from app.errors import ConfigError
from app.services.sweep import (
    SweepSpec,
    default_lambda_ratios,
    load_sweep_spec,
    parse_sweep_data,
    rows_to_csv,
    run_sweep,
    sweep_point,
)
from tests.conftest import CONFIG_DIR


class TestSweepPoint:
    """Tests for single grid points."""

    def test_circle_has_no_orthotropic_terms(self):
        """nu1 = 0 and Lambda = 1 give a6 = 0."""
        row = sweep_point(0.0, 1.0)
        assert row.a6_norm == 0.0
        assert row.a9_norm == 0.0

    def test_crack_endpoint_zero_poisson(self):
        """nu1 = 0 at the crack gives a4 = pi / 12."""
        row = sweep_point(0.0, 0.0)
        assert row.a4_norm == pytest.approx(math.pi / 12)
        assert row.a2_norm == 0.0

    def test_crack_endpoint_quarter_poisson(self):
        """nu1 = 0.25 means lam1 = mu1, so a2 = a4 = 3 pi / 32 at the crack."""
        row = sweep_point(0.25, 0.0)
        assert row.a2_norm == pytest.approx(3 * math.pi / 32)
        assert row.a4_norm == pytest.approx(3 * math.pi / 32)

    @pytest.mark.parametrize("nu1", [-0.5, 0.0, 0.25, 0.4])
    def test_family_relations(self, nu1):
        """a4 = a5 and a9 = 2 a6 at every point."""
        for ar in (0.0, 0.3, 0.8):
            row = sweep_point(nu1, ar)
            assert row.a5_norm == pytest.approx(row.a4_norm)
            assert row.a9_norm == pytest.approx(2.0 * row.a6_norm)

    def test_normalization(self):
        """Rows are divided by b1^2 mu1."""
        assert sweep_point(0.25, 0.5, b1=2.0, mu1=3.0).a4_norm == pytest.approx(sweep_point(0.25, 0.5).a4_norm)


class TestRunSweep:
    """Tests for the full grid."""

    def test_default_grid_size(self):
        """Four Poisson ratios times the crack row plus 100 aspect ratios."""
        assert len(run_sweep()) == 4 * 101

    def test_default_lambda_ratios(self):
        """The default grid runs from 0.01 to 1.0 in steps of 0.01."""
        ratios = default_lambda_ratios()
        assert (ratios[0], ratios[-1], len(ratios)) == (0.01, 1.0, 100)

    def test_row_order(self):
        """nu1-major, crack row first, aspect ratio ascending."""
        rows = run_sweep(SweepSpec(lambda_ratios=[0.5, 0.1, 0.5], nu1=[0.4, 0.0]))
        assert [(r.nu1, r.lambda_ratio) for r in rows] == [
            (0.4, 0.0), (0.4, 0.1), (0.4, 0.5), (0.0, 0.0), (0.0, 0.1), (0.0, 0.5),
        ]

    def test_crack_row_optional(self):
        """crack_limit false drops the Lambda = 0 rows."""
        rows = run_sweep(SweepSpec(lambda_ratios=[0.5], nu1=[0.0], crack_limit=False))
        assert [r.lambda_ratio for r in rows] == [0.5]


class TestSweepCsv:
    """Tests for the CSV encoding."""

    def test_header(self):
        """The first line names the columns."""
        csv = rows_to_csv(run_sweep(SweepSpec(lambda_ratios=[1.0], nu1=[0.0])))
        assert csv.splitlines()[0] == "lambda_ratio,nu1,a2_norm,a4_norm,a6_norm"

    def test_row_values(self):
        """Each row writes the repr of its values."""
        lines = rows_to_csv(run_sweep(SweepSpec(lambda_ratios=[1.0], nu1=[0.0], crack_limit=False))).splitlines()
        fields = lines[1].split(",")
        assert fields[:2] == ["1.0", "0.0"]
        assert float(fields[4]) == 0.0


class TestSweepSpec:
    """Tests for grid validation and loading."""

    @pytest.mark.parametrize(
        "data,message",
        [
            ({"lambda_ratios": [0.0]}, "lambda_ratios must lie in"),
            ({"lambda_ratios": [1.5]}, "lambda_ratios must lie in"),
            ({"nu1": [0.5]}, "nu1 must lie in"),
            ({"b1": -1.0}, "must be positive"),
            ({"lambda_ratios": [], "crack_limit": False}, "empty grid"),
            ({"steps": 10}, "steps"),
        ],
    )
    def test_invalid_grid(self, data, message):
        """Out-of-range and unknown fields are ConfigErrors."""
        with pytest.raises(ConfigError, match=message):
            parse_sweep_data(data)

    def test_empty_document_gives_default(self):
        """An empty body is the default grid."""
        assert parse_sweep_data({}) == SweepSpec()
        assert parse_sweep_data(None) == SweepSpec()

    def test_load_shipped_example(self):
        """configs/sweep.json is a valid grid."""
        spec = load_sweep_spec(str(CONFIG_DIR / "sweep.json"))
        assert spec.lambda_ratios == [0.1, 0.25, 0.5, 0.75, 1.0]

    def test_load_default(self):
        """No path gives the default grid."""
        assert load_sweep_spec(None) == SweepSpec()

    def test_load_missing_file(self):
        """A missing sweep file is a ConfigError."""
        with pytest.raises(ConfigError, match="Sweep file not found"):
            load_sweep_spec("/nonexistent/sweep.json")

    def test_load_invalid_json(self, write_config):
        """Broken JSON is a ConfigError."""
        with pytest.raises(ConfigError, match="Invalid JSON"):
            load_sweep_spec(write_config("{", "sweep.json"))
