"""
Sweep service - nonlocal parameters of the square RVE with an elliptical void
over a grid of aspect ratios and matrix Poisson ratios, normalized by b1^2 mu1.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.errors import ConfigError
from app.logging import get_logger
from app.services.geometry import IsotropicMaterial
from app.services.homogenization import square_crack_params, square_ellipse_params

logger = get_logger(__name__)

CSV_HEADER = ("lambda_ratio", "nu1", "a2_norm", "a4_norm", "a6_norm")
DEFAULT_NU1 = (-0.5, 0.0, 0.25, 0.4)


def default_lambda_ratios() -> List[float]:
    """0.01, 0.02, ..., 1.0."""
    return [round(0.01 * k, 2) for k in range(1, 101)]


class SweepSpec(BaseModel):
    """Grid definition; rows come out nu1-major, aspect ratio ascending."""

    model_config = ConfigDict(extra="forbid")

    lambda_ratios: List[float] = Field(default_factory=default_lambda_ratios)
    nu1: List[float] = Field(default_factory=lambda: list(DEFAULT_NU1))
    b1: float = 1.0
    mu1: float = 1.0
    crack_limit: bool = True

    @model_validator(mode="after")
    def _bounds(self) -> "SweepSpec":
        problems = []
        bad = [x for x in self.lambda_ratios if not 0.0 < x <= 1.0]
        if bad:
            problems.append(f"lambda_ratios must lie in (0, 1], got {bad}")
        bad = [x for x in self.nu1 if not -1.0 < x < 0.5]
        if bad:
            problems.append(f"nu1 must lie in (-1, 0.5), got {bad}")
        if not self.b1 > 0.0 or not self.mu1 > 0.0:
            problems.append(f"b1 and mu1 must be positive, got b1={self.b1}, mu1={self.mu1}")
        if not self.lambda_ratios and not self.crack_limit:
            problems.append("empty grid")
        if problems:
            raise ValueError("; ".join(problems))
        return self


@dataclass(frozen=True)
class SweepRow:
    lambda_ratio: float
    nu1: float
    a2_norm: float
    a4_norm: float
    a5_norm: float
    a6_norm: float
    a9_norm: float

    def csv_fields(self) -> List[str]:
        return [repr(float(getattr(self, name))) for name in CSV_HEADER]


def sweep_point(nu1: float, lambda_ratio: float, b1: float = 1.0, mu1: float = 1.0) -> SweepRow:
    """One grid point; lambda_ratio = 0 evaluates the crack closed form."""
    lam1 = IsotropicMaterial.from_poisson(nu1, mu1).lam
    if lambda_ratio == 0.0:
        p = square_crack_params(lam1, mu1, b1)
    else:
        p = square_ellipse_params(lam1, mu1, b1, lambda_ratio)
    p = p.scaled(1.0 / (b1 ** 2 * mu1))
    return SweepRow(
        lambda_ratio=float(lambda_ratio),
        nu1=float(nu1),
        a2_norm=float(p.a2[0]),
        a4_norm=float(p.a4[0]),
        a5_norm=float(p.a5[0]),
        a6_norm=float(p.a6),
        a9_norm=float(p.a9),
    )


def run_sweep(spec: Optional[SweepSpec] = None) -> List[SweepRow]:
    """Evaluate the grid. Points are independent; the row order is fixed."""
    spec = spec or SweepSpec()
    ratios = ([0.0] if spec.crack_limit else []) + sorted(set(spec.lambda_ratios))
    rows = [sweep_point(nu, ar, spec.b1, spec.mu1) for nu in spec.nu1 for ar in ratios]
    logger.info(f"Sweep evaluated {len(rows)} points ({len(spec.nu1)} Poisson ratios x {len(ratios)} aspect ratios)")
    return rows


def rows_to_csv(rows: List[SweepRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.csv_fields())
    return buffer.getvalue()


def parse_sweep_data(data) -> SweepSpec:
    try:
        return SweepSpec.model_validate(data or {})
    except ValidationError as e:
        raise ConfigError([f"{'.'.join(map(str, err['loc'])) or '<root>'}: {err['msg']}" for err in e.errors()])


def load_sweep_spec(path: Optional[str]) -> SweepSpec:
    """Sweep grid from a JSON file, or the default grid when path is None."""
    if path is None:
        return SweepSpec()
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError([f"Sweep file not found: {path}"])
    except json.JSONDecodeError as e:
        raise ConfigError([f"Invalid JSON in sweep file: {e}"])
    return parse_sweep_data(data)
