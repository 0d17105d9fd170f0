"""
Internal router - health check and the builtin verification suite.
"""
from typing import List

from fastapi import APIRouter, Query
from pydantic import BaseModel, Field

from app.config import get_settings
from app.services.geometry import MIN_MC_SAMPLES
from app.services.verification import run_builtin_suite

router = APIRouter(tags=["internal"])


class HealthResponse(BaseModel):
    """Health check response."""
    status: str = Field(example="healthy")


class CheckResponse(BaseModel):
    """Outcome of a single verification check."""
    name: str = Field(example="annihilation")
    max_residual: float = Field(example=3.1e-16, description="Largest relative residual over all cases")
    tolerance: float = Field(example=1e-12, description="Residual the check had to stay under")
    passed: bool = Field(example=True)
    cases: int = Field(example=1000, description="Number of cases evaluated")


class VerifyResponse(BaseModel):
    """Summary of the builtin suite."""
    passed: bool = Field(example=True, description="True when every check passed")
    seconds: float = Field(example=2.41, description="Wall time of the suite")
    checks: List[CheckResponse]


@router.get("/health", response_model=HealthResponse)
async def health() -> HealthResponse:
    """Health check endpoint."""
    return HealthResponse(status="healthy")


@router.get("/verify", response_model=VerifyResponse)
def verify(
    samples: int = Query(100_000, ge=MIN_MC_SAMPLES, description="Monte-Carlo samples for the geometry check"),
) -> VerifyResponse:
    """
    Run the builtin invariant suite, seeded from the settings.

    The Monte-Carlo tolerance widens as sqrt(10^6 / samples) below 10^6 samples.
    """
    summary = run_builtin_suite(seed=get_settings().seed, samples=samples)
    return VerifyResponse(
        passed=summary.passed,
        seconds=summary.seconds,
        checks=[CheckResponse(**c.to_dict()) for c in summary.checks],
    )
