"""Structured logging for the CLI and the long-running training loop."""

import logging
import sys
from typing import Any, Optional

import structlog
from structlog.types import EventDict, Processor

from permsynth.core.config import Settings, get_settings


def add_app_name(logger: Any, method_name: str, event_dict: EventDict) -> EventDict:
    """Tag every entry so merged training/bench logs stay attributable."""
    event_dict.setdefault("app", "permsynth")
    return event_dict


def build_processors(settings: Settings) -> list[Processor]:
    """Processor chain: key/value console lines, or one JSON object per line in production."""
    processors: list[Processor] = [
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        add_app_name,
        structlog.processors.TimeStamper(fmt="iso"),
    ]
    if settings.is_production:
        return processors + [
            structlog.processors.format_exc_info,
            structlog.processors.JSONRenderer(),
        ]
    return processors + [structlog.dev.ConsoleRenderer(colors=False)]


def configure_logging(settings: Optional[Settings] = None) -> None:
    settings = settings or get_settings()

    # stderr: stdout carries circuit text and oracle answers
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, settings.log_level.upper()),
    )
    structlog.configure(
        processors=build_processors(settings),
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )


def get_logger(name: str) -> structlog.BoundLogger:
    return structlog.get_logger(name)
