"""
Process-level settings for the Kirchhoff blow-up lab.

Run parameters live in the YAML run config (see ``src.models.config``); this
module only holds what the environment decides: where artifacts go, how logs
look and whether metrics are written.
"""

from functools import lru_cache
from pathlib import Path
from typing import Literal, Optional

from dotenv import load_dotenv
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables
load_dotenv()


class Settings(BaseSettings):
    """Application settings."""

    model_config = SettingsConfigDict(env_prefix="KIRCHHOFF_", env_file=".env",
                                      case_sensitive=False, extra="ignore")

    # Output
    output_dir: Optional[Path] = Field(None, description="Overrides the config output_dir")

    # Logging
    log_level: str = "INFO"
    log_format: Literal["json", "console"] = "json"

    # Telemetry
    metrics_enabled: bool = True
    metrics_file: str = "metrics.prom"

    # Parallelism
    workers: int = Field(1, ge=1, description="Default process pool size")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v):
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level {v}")
        return level


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Settings read once per process."""
    return Settings()
