"""Numeric settings loaded from YAML, validated with pydantic."""
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_SETTINGS_PATH = Path(__file__).with_name("settings.yaml")
SETTINGS_ENV = "DISTORTION_LAB_SETTINGS"
THREADS_ENV = "DISTORTION_LAB_THREADS"


class GrowthSettings(BaseModel):
    quad_epsabs: float = 1e-10
    quad_epsrel: float = 1e-10
    quad_limit: int = 500
    convexity_points_per_decade: int = Field(512, ge=16)
    convexity_decades: int = Field(8, ge=2)
    convexity_tolerance: float = 1e-9
    derivative_tolerance: float = 1e-7


class FieldSettings(BaseModel):
    gluing_tolerance: float = 1e-12
    allow_one_sided: bool = False


class FunctionalSettings(BaseModel):
    exact_tolerance: float = 1e-9
    sampled_tolerance: float = 1e-4
    margin_factor: float = Field(10.0, ge=1.0)
    cross_section_order: int = Field(24, ge=2)
    weight_knots: int = Field(257, ge=9)


class ConstructSettings(BaseModel):
    dispatcher_points: int = Field(4096, ge=64)
    dispatcher_t_max: float = Field(1e6, gt=1.0)
    dispatcher_lambda_steps: int = Field(64, ge=2)
    dispatcher_max_span: int = Field(2048, ge=1)
    cantor_max_j: int = Field(14, ge=3)
    laminate_max_j: int = Field(20, ge=3)


class CriteriaSettings(BaseModel):
    schedule_points: int = Field(24, ge=6)
    schedule_ratio: float = Field(0.5, gt=0.0, lt=1.0)
    bounded_factor: float = 2.0
    growth_slope: float = 1e-3
    sphere_order: int = Field(24, ge=4)


class CliSettings(BaseModel):
    j_max: int = Field(12, ge=3, le=30)
    resolution: int = Field(32, ge=8, le=1024)


class Settings(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    growth: GrowthSettings = GrowthSettings()
    field: FieldSettings = FieldSettings()
    functional: FunctionalSettings = FunctionalSettings()
    construction: ConstructSettings = Field(ConstructSettings(), alias="construct")
    criteria: CriteriaSettings = CriteriaSettings()
    cli: CliSettings = CliSettings()
    threads: Optional[int] = Field(None, ge=1)

    @property
    def n_jobs(self) -> int:
        """Thread count handed to joblib (1 means run inline)"""
        return self.threads or 1


def load_settings(path: Optional[Path] = None) -> Settings:
    """
    Load settings from a YAML file and apply environment overrides

    Args:
        path: YAML file; defaults to $DISTORTION_LAB_SETTINGS or the packaged file

    Returns:
        Validated Settings
    """
    if path is None:
        path = Path(os.environ.get(SETTINGS_ENV, DEFAULT_SETTINGS_PATH))

    raw: Dict[str, Any] = {}
    try:
        with open(path, "r") as f:
            raw = yaml.safe_load(f) or {}
    except FileNotFoundError:
        logger.warning(f"Settings file {path} not found, using built-in defaults")
    except yaml.YAMLError as e:
        raise ConfigError(f"Cannot parse settings file {path}: {e}")

    threads = os.environ.get(THREADS_ENV)
    if threads:
        try:
            raw["threads"] = max(1, int(threads))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {threads!r}")

    try:
        settings = Settings.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid settings in {path}: {e}")

    logger.debug(f"Settings loaded from {path} (threads={settings.threads})")
    return settings


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Return the process-wide settings, loading them on first use"""
    global _settings
    if _settings is None:
        _settings = load_settings()
    return _settings


def reset_settings(settings: Optional[Settings] = None) -> None:
    """Replace (or drop) the cached settings; used by the CLI and tests"""
    global _settings
    _settings = settings
