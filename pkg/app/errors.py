"""
Error types shared by the services, the CLI and the HTTP routers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List


@dataclass(frozen=True)
class ModelWarning:
    """A non-fatal finding that must reach the report, never be swallowed."""

    code: str
    message: str

    def to_dict(self) -> Dict[str, str]:
        return {"code": self.code, "message": self.message}


class ConfigError(ValueError):
    """Invalid job configuration. Holds every violation found, not just the first."""

    def __init__(self, violations: Iterable[str]):
        self.violations: List[str] = list(violations)
        super().__init__("; ".join(self.violations) or "invalid configuration")


class ModelError(ValueError):
    """Model inputs the formulas cannot accept (zero denominators, bad geometry, ...)."""


class VerificationError(RuntimeError):
    """A verification check failed."""
