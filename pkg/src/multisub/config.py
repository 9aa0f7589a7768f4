"""Configuration management for multisub."""

import json
import logging
import os
from pathlib import Path
from typing import Literal

from dotenv import load_dotenv
from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)


class OmegaConfig(BaseModel):
    """Construction of the invariant index set."""

    policy: Literal["auto", "omega-c", "omega-v"] = "auto"
    max_rounds: int = Field(default=10_000, ge=1)
    join_retries: int = Field(default=4, ge=0)
    max_points: int = Field(default=1_000_000, ge=1)


class SchemeConfig(BaseModel):
    """Validation and powering of scheme sets."""

    expansion_depth: int = Field(default=4, ge=1)
    max_power: int = Field(default=6, ge=1)
    max_power_operators: int = Field(default=64, ge=1)


class JsrConfig(BaseModel):
    """Joint spectral radius search budgets."""

    lower_max_len: int = Field(default=6, ge=1)
    upper_depth: int = Field(default=8, ge=1)
    product_budget: int = Field(default=400_000, ge=1)
    max_vertices: int = Field(default=200, ge=0)
    norm: Literal["inf", "2"] = "inf"
    threads: int = Field(default=1, ge=1)
    identity_tolerance: float = 1e-9
    lp_tolerance: float = 1e-8
    relax_steps: list[float] = Field(default_factory=lambda: [0.1, 0.05, 0.02])
    relax_max_vertices: int = Field(default=400, ge=0)
    relax_tolerance: float = Field(default=1e-6, gt=0)


class RenderConfig(BaseModel):
    """Point clouds and rasters."""

    point_budget: int = Field(default=1_000_000, ge=1)
    seed: int = 0


class AnalysisConfig(BaseModel):
    verdict_tolerance: float = 1e-12


class MultisubConfig(BaseModel):
    """multisub configuration."""

    omega: OmegaConfig = Field(default_factory=OmegaConfig)
    scheme: SchemeConfig = Field(default_factory=SchemeConfig)
    jsr: JsrConfig = Field(default_factory=JsrConfig)
    render: RenderConfig = Field(default_factory=RenderConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)


ENV_VARS = [
    "MULTISUB_HOME",
    "MULTISUB_THREADS",
    "MULTISUB_MAX_DEPTH",
    "MULTISUB_MAX_VERTICES",
    "MULTISUB_OMEGA_POLICY",
    "MULTISUB_POINT_BUDGET",
]


def get_config_dir() -> Path:
    """Configuration directory, ``~/.multisub`` unless MULTISUB_HOME is set."""
    return Path(os.getenv("MULTISUB_HOME") or Path.home() / ".multisub")


def get_config_file() -> Path:
    return get_config_dir() / "config.json"


def get_env_file() -> Path:
    return get_config_dir() / ".env"


def _int_from_env(name: str) -> int | None:
    raw = os.getenv(name)
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError:
        logger.warning("Ignoring %s=%r: not an integer", name, raw)
        return None
    if value < 1:
        logger.warning("Ignoring %s=%r: must be positive", name, raw)
        return None
    return value


def load_config() -> MultisubConfig:
    """
    Load configuration from file and environment variables.

    Priority: Environment variables > Config file > Defaults

    Returns:
        MultisubConfig: The loaded configuration
    """
    env_file = get_env_file()
    if env_file.exists():
        load_dotenv(env_file)

    config = MultisubConfig()

    config_file = get_config_file()
    if config_file.exists():
        try:
            with open(config_file) as f:
                config = MultisubConfig(**json.load(f))
        except (json.JSONDecodeError, ValueError) as e:
            logger.warning("Failed to load config file %s: %s; using defaults", config_file, e)

    if (threads := _int_from_env("MULTISUB_THREADS")) is not None:
        config.jsr.threads = threads

    if (depth := _int_from_env("MULTISUB_MAX_DEPTH")) is not None:
        config.jsr.upper_depth = depth

    if (vertices := _int_from_env("MULTISUB_MAX_VERTICES")) is not None:
        config.jsr.max_vertices = vertices

    if (budget := _int_from_env("MULTISUB_POINT_BUDGET")) is not None:
        config.render.point_budget = budget

    policy = os.getenv("MULTISUB_OMEGA_POLICY")
    if policy:
        if policy in ["auto", "omega-c", "omega-v"]:
            config.omega.policy = policy  # type: ignore
        else:
            logger.warning("Ignoring MULTISUB_OMEGA_POLICY=%r", policy)

    return config


def save_config(config: MultisubConfig) -> None:
    """
    Save configuration to file.

    Args:
        config: Configuration to save
    """
    get_config_dir().mkdir(parents=True, exist_ok=True)
    with open(get_config_file(), "w") as f:
        json.dump(config.model_dump(), f, indent=2)
