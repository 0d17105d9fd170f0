"""
Report service - assembles report documents from analysis results and
serializes them to JSON and CSV.

Re-running a job yields a byte-identical document: sections and fields are
emitted in a fixed order and floats use Python's shortest round-trip repr.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from app.config import Settings
from app.errors import ModelWarning
from app.logging import get_logger
from app.services import discrepancy as disc
from app.services.geometry import InertiaSummary, Microstructure, inertia_summary, monte_carlo_inertia
from app.services.homogenization import (
    CRACK_LIMIT_RATIO,
    HomogenizationResult,
    analyze,
    anisotropy_ratios,
    inertia_ratios,
)
from app.services.job_config import JobConfig
from app.services.tensor_core import classify_symmetry, condensed_matrix, tensor_to_dict
from app.services.verification import CheckResult, job_checks

logger = get_logger(__name__)

SECTIONS = ("config", "inertia", "ctilde", "aeq", "params", "definiteness", "symmetry", "warnings", "verification")


def _floats(values) -> Any:
    return np.asarray(values, dtype=float).tolist()


def inertia_to_dict(summary: InertiaSummary) -> Dict[str, Any]:
    data = {
        "measure": float(summary.measure),
        "static_moment": _floats(summary.static_moment),
        "euler": _floats(summary.euler.components),
        "normalized": _floats(summary.normalized.components),
        "radii": _floats(summary.radii),
        "axes": _floats(summary.axes),
    }
    if summary.measure_stderr is not None:
        data["stderr"] = {
            "measure": float(summary.measure_stderr),
            "static_moment": _floats(summary.static_moment_stderr),
            "euler": _floats(summary.euler_stderr),
        }
    return data


def inertia_section(
    m: Microstructure, monte_carlo: bool = False, samples: int = 1_000_000, seed: int = 0
) -> Dict[str, Any]:
    """RVE and inclusion summaries normalized by the RVE measure, plus B of the matrix phase."""
    omega = m.rve.measure()
    summarize = (
        (lambda s: monte_carlo_inertia(s, samples, seed, rve_measure=omega))
        if monte_carlo
        else (lambda s: inertia_summary(s, rve_measure=omega))
    )
    section: Dict[str, Any] = {"method": "monte_carlo" if monte_carlo else "analytic"}
    section["rve"] = inertia_to_dict(summarize(m.rve))
    if m.inclusion is not None:
        section["inclusion"] = inertia_to_dict(summarize(m.inclusion))
        section["matrix"] = {
            "normalized": _floats(
                np.array(section["rve"]["normalized"]) - np.array(section["inclusion"]["normalized"])
            )
        }
    section["f"] = float(m.volume_fraction)
    return section


def ctilde_section(result: HomogenizationResult) -> Dict[str, Any]:
    d = result.discrepancy
    negative, details = disc.is_negative_definite(d if d is not None else result.ctilde)
    section: Dict[str, Any] = {}
    if d is None:
        identified = disc.identify_isotropic(result.ctilde)
        d = identified
    if d is not None:
        section["lambda_tilde"] = float(d.lambda_tilde)
        section["mu_tilde"] = float(d.mu_tilde)
        if isinstance(d, disc.OrthotropicDiscrepancy):
            section["xi_tilde"] = float(d.xi_tilde)
            section["omega_tilde"] = float(d.omega_tilde)
        section["K_tilde"] = float(d.bulk_tilde)
    section["negative_definite"] = bool(negative)
    section["definiteness_details"] = {k: float(v) for k, v in details.items()}
    if result.model == "square_crack":
        # C~ diverges at the crack limit; these are the values of the witness ellipse
        section["witness_aspect_ratio"] = CRACK_LIMIT_RATIO
    section["tensor"] = tensor_to_dict(result.ctilde)
    return section


def aeq_section(result: HomogenizationResult) -> Dict[str, Any]:
    return {
        "dim": result.aeq.dim,
        "norm": result.aeq.norm(),
        "condensed": _floats(condensed_matrix(result.aeq)),
    }


def params_section(result: HomogenizationResult) -> Optional[Dict[str, Any]]:
    if result.params is None:
        return None
    section = result.params.to_dict()
    if result.literal_deviation is not None:
        section["literal_deviation"] = float(result.literal_deviation)
    try:
        section["ratios"] = anisotropy_ratios(result.params).to_dict()
        section["ratios"]["inertia"] = inertia_ratios(result.b_rve, result.params.axes)
    except ValueError:
        section["ratios"] = None
    return section


def symmetry_section(result: HomogenizationResult, settings: Settings) -> Dict[str, Any]:
    return {
        "aeq": result.symmetry,
        "intersection": result.symmetry_intersection,
        "ctilde": classify_symmetry(result.ctilde, tol=settings.classify_tol),
        "b_rve": classify_symmetry(result.b_rve, tol=settings.classify_tol),
    }


@dataclass
class ReportDocument:
    """One report; sections left as None are omitted from the output."""

    config: Dict[str, Any]
    inertia: Optional[Dict[str, Any]] = None
    ctilde: Optional[Dict[str, Any]] = None
    aeq: Optional[Dict[str, Any]] = None
    params: Optional[Dict[str, Any]] = None
    definiteness: Optional[Dict[str, Any]] = None
    symmetry: Optional[Dict[str, Any]] = None
    warnings: Optional[List[Dict[str, str]]] = None
    verification: Optional[Dict[str, Any]] = None
    condensed_aeq: Optional[np.ndarray] = None

    def to_dict(self) -> Dict[str, Any]:
        out = {}
        for name in SECTIONS:
            value = getattr(self, name)
            if value is not None or name == "params" and self.aeq is not None:
                out[name] = value
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        """Condensed A_eq, one row per condensed coordinate."""
        if self.condensed_aeq is None:
            raise ValueError("No A_eq in this report")
        return condensed_to_csv(self.condensed_aeq)


def condensed_to_csv(matrix: np.ndarray) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    size = matrix.shape[0]
    writer.writerow(["row"] + [f"c{j}" for j in range(size)])
    for i, row in enumerate(matrix):
        writer.writerow([i] + [repr(float(x)) for x in row])
    return buffer.getvalue()


def _warnings(*groups) -> List[Dict[str, str]]:
    seen: List[ModelWarning] = []
    for group in groups:
        for w in group:
            if w not in seen:
                seen.append(w)
    return [w.to_dict() for w in seen]


def _verification_dict(checks: List[CheckResult]) -> Dict[str, Any]:
    return {"passed": all(c.passed for c in checks), "checks": [c.to_dict() for c in checks]}


def build_report(
    cfg: JobConfig,
    m: Microstructure,
    result: HomogenizationResult,
    settings: Settings,
    sections=SECTIONS,
) -> ReportDocument:
    """Report for one analysed job, restricted to the requested sections."""
    wanted = set(sections)
    doc = ReportDocument(config=cfg.echo())
    if "inertia" in wanted:
        doc.inertia = inertia_section(m)
    if "ctilde" in wanted:
        doc.ctilde = ctilde_section(result)
    if "aeq" in wanted:
        doc.aeq = aeq_section(result)
        doc.condensed_aeq = condensed_matrix(result.aeq)
        doc.params = params_section(result)
    if "definiteness" in wanted:
        doc.definiteness = {
            "positive_definite": bool(result.positive_definite),
            "min_eigenvalue": float(result.min_eigenvalue),
        }
    if "symmetry" in wanted:
        doc.symmetry = symmetry_section(result, settings)
    doc.warnings = _warnings(result.warnings)
    if "verification" in wanted:
        doc.verification = _verification_dict(job_checks(result, settings.seed))
    return doc


def inertia_report(cfg: JobConfig, m: Microstructure, settings: Settings, monte_carlo: bool = False) -> ReportDocument:
    return ReportDocument(
        config=cfg.echo(),
        inertia=inertia_section(m, monte_carlo, settings.mc_samples, settings.seed),
        warnings=_warnings(m.dilute_warnings(settings.dilute_threshold)),
    )


COMMAND_SECTIONS = {
    "ctilde": ("config", "ctilde", "warnings"),
    "homogenize": SECTIONS,
    "classify": ("config", "definiteness", "symmetry", "warnings"),
}


def run_command(
    command: str,
    cfg: JobConfig,
    base: Settings,
    monte_carlo: bool = False,
) -> ReportDocument:
    """
    Run one analysis command on a validated job.

    Raises:
        ModelError: the inputs are outside what the formulas accept
    """
    settings = cfg.settings(base)
    m = cfg.microstructure(settings.consistency_tol)
    if command == "inertia":
        return inertia_report(cfg, m, settings, monte_carlo)
    if command not in COMMAND_SECTIONS:
        raise ValueError(f"Unknown command {command!r}")
    result = analyze(m, cfg.selection(settings.symmetry_tol), settings)
    return build_report(cfg, m, result, settings, COMMAND_SECTIONS[command])


def run_homogenize(cfg: JobConfig, base: Settings) -> ReportDocument:
    """Full report of one job: every section plus its verification checks."""
    return run_command("homogenize", cfg, base)
