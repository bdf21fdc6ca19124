"""Process settings and logging setup"""

import logging
import sys
from functools import lru_cache

import structlog
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class Settings(BaseSettings):
    """Defaults for the engine, overridable through LTA_* environment variables"""

    model_config = SettingsConfigDict(env_prefix="LTA_", env_file=".env", extra="ignore")

    log_level: str = "WARNING"
    log_json: bool = False
    max_steps: int = Field(default=50, ge=1)
    widen_after: int = Field(default=3, ge=0)
    strict_int: bool = False
    oracle_max_depth: int = Field(default=3, ge=1)
    oracle_max_terms: int = Field(default=20000, ge=1)

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"log_level must be one of {', '.join(LOG_LEVELS)}")
        return level


@lru_cache
def get_settings() -> Settings:
    return Settings()


def configure_logging(level: str = "WARNING", json: bool = False) -> None:
    """
    Route structlog events to stderr so stdout only carries command output

    Args:
        level: Minimum level name (DEBUG, INFO, WARNING, ERROR)
        json: Render events as JSON lines instead of key=value pairs
    """
    renderer = (
        structlog.processors.JSONRenderer()
        if json
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.getLevelName(level.upper())
        ),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
