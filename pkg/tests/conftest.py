"""
Shared test fixtures and helpers.
"""
from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Callable, Dict

import numpy as np
import pytest

from app.config import Settings, get_settings
from app.logging import set_level

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def job(**overrides: Any) -> Dict[str, Any]:
    """Rectangle-circle job document with default or custom fields."""
    data: Dict[str, Any] = {
        "schema_version": 1,
        "dimension": 2,
        "rve": {"kind": "rectangle", "h1": 2.0, "h2": 1.0},
        "inclusion": {"shape": {"kind": "circle", "r": 0.1}, "material": {"K": 1.0, "mu": 0.5}},
        "matrix": {"K": 2.0, "mu": 1.0},
        "model": "rect_circle",
    }
    data.update(copy.deepcopy(overrides))
    return data


def load_example(name: str) -> Dict[str, Any]:
    """Decoded JSON of one of the shipped example configs."""
    return json.loads((CONFIG_DIR / name).read_text())


@pytest.fixture
def settings() -> Settings:
    """Settings with every default, independent of the environment cache."""
    return Settings()


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for randomized property checks."""
    return np.random.default_rng(20130521)


@pytest.fixture
def rect_circle_job() -> Dict[str, Any]:
    """The rectangle-circle worked example: K1=2, mu1=1, K2=1, mu2=0.5, r=0.1, 2 x 1 RVE."""
    return job()


@pytest.fixture
def write_config(tmp_path) -> Callable[[Any, str], str]:
    """Write a JSON document to a temporary file and return its path."""
    def _write(data: Any, name: str = "job.json") -> str:
        path = tmp_path / name
        path.write_text(data if isinstance(data, str) else json.dumps(data))
        return str(path)

    return _write


@pytest.fixture
def mock_env(monkeypatch):
    """Environment overrides for the settings, with the cached settings cleared."""
    monkeypatch.setenv("SGEHOM_SEED", "7")
    monkeypatch.setenv("SGEHOM_DILUTE_THRESHOLD", "0.01")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture(autouse=True)
def fresh_settings_cache():
    """No test sees settings cached by another."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture(autouse=True)
def reset_log_sink():
    """Point the log sink back at the session stderr after CLI runs swapped it."""
    yield
    set_level("INFO")
