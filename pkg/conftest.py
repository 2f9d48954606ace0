from pathlib import Path

import pytest

from distortion_lab.config import reset_settings

SPECS = Path(__file__).parent / "specs"


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Every test starts from the packaged settings.yaml"""
    monkeypatch.delenv("DISTORTION_LAB_SETTINGS", raising=False)
    monkeypatch.delenv("DISTORTION_LAB_THREADS", raising=False)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def specs() -> Path:
    return SPECS
