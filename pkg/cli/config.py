"""
Configuration management for the PICNIQ CLI
Process settings come from the environment; experiment settings come from
strictly validated JSON config files.
"""

import json
import logging
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import Field
from pydantic_settings import BaseSettings

from picniq.models.configs import (
    ComparatorConfig,
    InferenceConfig,
    MleScalerConfig,
    ObserverConfig,
    StrictModel,
    TrainConfig,
    TrueSkillConfig,
)

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    """Unreadable experiment config file."""


class Settings(BaseSettings):
    """
    Process settings loaded from environment variables or .env.
    """

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: Literal["text", "json"] = "text"

    # Root seed when neither --seed nor the config file sets one
    DEFAULT_SEED: int = Field(0, ge=0)

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = True


class ExperimentConfig(StrictModel):
    """
    One experiment's parameters. Every section is optional and falls back to
    its defaults; unknown keys anywhere are rejected.
    """

    seed: Optional[int] = Field(None, ge=0, description="Root seed for every random sub-stream")
    observer: ObserverConfig = Field(default_factory=ObserverConfig)
    trueskill: TrueSkillConfig = Field(default_factory=TrueSkillConfig)
    mle: MleScalerConfig = Field(default_factory=MleScalerConfig)
    model: ComparatorConfig = Field(default_factory=ComparatorConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    inference: InferenceConfig = Field(default_factory=InferenceConfig)
    paths: dict[str, Optional[str]] = Field(default_factory=dict)


def load_experiment_config(path: Optional[Union[str, Path]]) -> ExperimentConfig:
    """
    Read and validate an experiment config; no path means all defaults.

    Raises:
        ConfigError: If the file is missing or not JSON
        pydantic.ValidationError: If the content does not match the schema
    """
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")
    config = ExperimentConfig.model_validate(data)
    logger.debug(f"loaded experiment config from {path}")
    return config


def resolve_seed(flag: Optional[int], config: ExperimentConfig, settings: Settings) -> int:
    """--seed beats the config file, which beats DEFAULT_SEED."""
    if flag is not None:
        if flag < 0:
            raise ValueError(f"--seed must be non-negative, got {flag}")
        return flag
    if config.seed is not None:
        return config.seed
    return settings.DEFAULT_SEED


# Global settings instance
settings = Settings()
