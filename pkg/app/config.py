"""
Application configuration from environment variables.
"""
from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache


class Settings(BaseSettings):
    # Volume fraction above which the dilute approximation is flagged
    dilute_threshold: float = 0.1
    # Relative tolerances
    symmetry_tol: float = 1e-12  # gap accepted on user-supplied tensors
    classify_tol: float = 1e-9
    definiteness_tol: float = 1e-12
    fit_tol: float = 1e-10
    consistency_tol: float = 1e-9

    mc_samples: int = 1_000_000
    seed: int = 20130521
    erratum_sign_3d: bool = False
    log_level: str = "INFO"

    model_config = SettingsConfigDict(
        env_prefix="SGEHOM_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    def with_overrides(self, **overrides) -> "Settings":
        """Copy with the non-None overrides applied (CLI flags, job flags)."""
        update = {k: v for k, v in overrides.items() if v is not None}
        return self.model_copy(update=update) if update else self


@lru_cache
def get_settings() -> Settings:
    return Settings()
