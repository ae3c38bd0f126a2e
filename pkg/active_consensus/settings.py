"""Process-level settings read from the environment."""

import logging
import sys
from pathlib import Path

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

LOG_LEVELS = ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG")


class Settings(BaseSettings):
    """Settings controlled by ``ACONS_*`` environment variables.

    ``ACONS_LOG`` sets log verbosity, ``ACONS_JOBS`` the default worker count
    and ``ACONS_OUT`` the default output directory. Command-line flags take
    precedence over these values.
    """

    model_config = SettingsConfigDict(env_prefix="ACONS_", extra="ignore")

    log: str = "WARNING"
    jobs: int = 1
    out: Path = Path("out")

    @field_validator("log")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.strip().upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"unknown log level '{value}'")
        return level

    @field_validator("jobs")
    @classmethod
    def _positive_jobs(cls, value: int) -> int:
        if value < 1:
            raise ValueError("jobs must be at least 1")
        return value


def configure_logging(level: str) -> None:
    """Send package logs to stderr at the given level."""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )
