"""Run manifest entity."""

from datetime import datetime, timezone
from typing import Any

from pydantic import BaseModel, Field

from permsynth import __version__


class RunManifest(BaseModel):
    """Everything needed to replay a CLI run."""

    command: str
    config: dict[str, Any] = Field(default_factory=dict, description="Resolved config snapshot")
    seed: int | None = None
    threads: int = 1
    artifacts: dict[str, str] = Field(default_factory=dict, description="Artifact role -> path")
    tool_version: str = __version__
    formats: dict[str, int] = Field(default_factory=dict)
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
