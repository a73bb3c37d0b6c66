"""Application configuration using Pydantic Settings."""

from functools import lru_cache
from pathlib import Path
from typing import Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

PROJECT_ROOT = Path(__file__).parent.parent.parent.parent


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="PERMSYNTH_",
        case_sensitive=False,
        extra="ignore",
    )

    # Environment
    environment: Literal["development", "staging", "production"] = "development"
    debug: bool = False
    log_level: str = "INFO"

    # Artifacts
    output_dir: Path = Field(
        default=Path("./runs"),
        description="Default directory for models, logs, circuits and manifests",
    )
    topologies_file: Path = PROJECT_ROOT / "config" / "topologies.yaml"
    train_config_file: Path = PROJECT_ROOT / "config" / "train.yaml"

    # Execution
    threads: int = 1  # 1 = deterministic reference mode

    @field_validator("threads")
    @classmethod
    def validate_threads(cls, v: int) -> int:
        """Threads must be a positive count."""
        if v < 1:
            raise ValueError("threads must be >= 1")
        return v

    @property
    def is_production(self) -> bool:
        """Check if running in production mode."""
        return self.environment == "production"


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
