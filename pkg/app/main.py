"""
SGE Homogenizer - dilute second-gradient homogenization service

Entry point for the FastAPI application.
"""
from __future__ import annotations

from contextlib import asynccontextmanager

from dotenv import load_dotenv
from fastapi import FastAPI

from app import __version__
from app.config import get_settings
from app.logging import get_logger, set_level
from app.routers import analysis, internal

load_dotenv()

logger = get_logger(__name__)


def _init_settings() -> None:
    """Apply the configured log level and log the tolerances in effect."""
    settings = get_settings()
    set_level(settings.log_level)
    logger.info(
        f"Settings: dilute threshold {settings.dilute_threshold}, classify tol {settings.classify_tol:g}, "
        f"fit tol {settings.fit_tol:g}, erratum sign 3D {settings.erratum_sign_3d}, seed {settings.seed}"
    )


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifespan manager."""
    _init_settings()
    yield


app = FastAPI(
    title="SGE Homogenizer",
    description="Effective second-gradient elasticity of dilute two-phase composites",
    version=__version__,
    lifespan=lifespan,
)

app.include_router(analysis.router)
app.include_router(internal.router)
