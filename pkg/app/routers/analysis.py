"""
Analysis router - runs job configurations through the homogenization pipeline.

Every endpoint takes the same JSON job document the CLI reads and answers with
the report sections the matching CLI subcommand writes.
"""
from __future__ import annotations

from typing import Any, Dict, Literal, Optional

from fastapi import APIRouter, Body, HTTPException, Query, Response

from app.config import get_settings
from app.errors import ConfigError, ModelError
from app.logging import get_logger
from app.services.job_config import parse_config_data
from app.services.report import ReportDocument, run_command
from app.services.sweep import parse_sweep_data, rows_to_csv, run_sweep

logger = get_logger(__name__)

router = APIRouter(tags=["analysis"])

ERROR_RESPONSES = {
    400: {"description": "Invalid job configuration; `detail` lists every violation"},
    422: {"description": "Inputs the model formulas cannot accept"},
}

EXAMPLE_JOB = {
    "schema_version": 1,
    "dimension": 2,
    "rve": {"kind": "rectangle", "h1": 2.0, "h2": 1.0},
    "inclusion": {"shape": {"kind": "circle", "r": 0.1}, "material": {"K": 1.0, "mu": 0.5}},
    "matrix": {"K": 2.0, "mu": 1.0},
    "model": "rect_circle",
}


def run_job(command: str, body: Dict[str, Any], monte_carlo: bool = False) -> ReportDocument:
    """
    Validate a job document and run one command on it.

    Raises:
        HTTPException: 400 on configuration violations, 422 on model errors
    """
    settings = get_settings()
    try:
        cfg = parse_config_data(body, settings)
        return run_command(command, cfg, settings, monte_carlo=monte_carlo)
    except ConfigError as e:
        raise HTTPException(status_code=400, detail=e.violations)
    except ModelError as e:
        logger.warning(f"Rejected {command} job: {e}")
        raise HTTPException(status_code=422, detail=str(e))


@router.post("/inertia", responses=ERROR_RESPONSES)
async def inertia(
    body: Dict[str, Any] = Body(..., example=EXAMPLE_JOB),
    monte_carlo: bool = Query(False, description="Estimate by sampling instead of closed forms"),
) -> Dict[str, Any]:
    """Normalized inertia tensors of the RVE, the inclusion and the matrix phase."""
    return run_job("inertia", body, monte_carlo).to_dict()


@router.post("/ctilde", responses=ERROR_RESPONSES)
async def ctilde(body: Dict[str, Any] = Body(..., example=EXAMPLE_JOB)) -> Dict[str, Any]:
    """Elastic discrepancy tensor with its parameters and definiteness."""
    return run_job("ctilde", body).to_dict()


@router.post(
    "/homogenize",
    responses={
        **ERROR_RESPONSES,
        200: {
            "description": "Full report, or the condensed A_eq matrix when `format=csv`",
            "content": {"application/json": {}, "text/csv": {}},
        },
    },
)
async def homogenize(
    body: Dict[str, Any] = Body(..., example=EXAMPLE_JOB),
    format: Literal["json", "csv"] = Query("json"),
):
    """
    Full homogenization report.

    Top-level keys, in order: config, inertia, ctilde, aeq, params,
    definiteness, symmetry, warnings, verification.
    """
    doc = run_job("homogenize", body)
    if format == "csv":
        return Response(content=doc.to_csv(), media_type="text/csv")
    return doc.to_dict()


@router.post("/classify", responses=ERROR_RESPONSES)
async def classify(body: Dict[str, Any] = Body(..., example=EXAMPLE_JOB)) -> Dict[str, Any]:
    """Positive definiteness and symmetry class of A_eq."""
    return run_job("classify", body).to_dict()


@router.post(
    "/sweep",
    response_class=Response,
    responses={
        200: {"description": "CSV with header lambda_ratio,nu1,a2_norm,a4_norm,a6_norm", "content": {"text/csv": {}}},
        400: {"description": "Grid bounds violations"},
    },
)
async def sweep(body: Optional[Dict[str, Any]] = Body(None)) -> Response:
    """Normalized parameters of a square RVE with an elliptical void over an aspect ratio x Poisson ratio grid."""
    try:
        spec = parse_sweep_data(body)
    except ConfigError as e:
        raise HTTPException(status_code=400, detail=e.violations)
    return Response(content=rows_to_csv(run_sweep(spec)), media_type="text/csv")
