"""Tests for the structlog processor chain."""

import structlog

from permsynth.core.config import Settings
from permsynth.core.logging import add_app_name, build_processors


class TestBuildProcessors:
    """Tests for renderer selection."""

    def test_production_renders_json(self):
        """Test that production logs end in the JSON renderer."""
        processors = build_processors(Settings(environment="production"))
        assert isinstance(processors[-1], structlog.processors.JSONRenderer)
        assert structlog.processors.format_exc_info in processors

    def test_development_renders_console(self):
        """Test that non-production environments log key/value console lines."""
        for environment in ("development", "staging"):
            processors = build_processors(Settings(environment=environment))
            assert isinstance(processors[-1], structlog.dev.ConsoleRenderer)

    def test_app_name_added(self):
        """Test that entries are tagged with the application name."""
        event = add_app_name(None, "info", {"event": "Training started"})
        assert event["app"] == "permsynth"

    def test_app_name_not_overwritten(self):
        """Test that an explicit app key is kept."""
        event = add_app_name(None, "info", {"event": "x", "app": "bench"})
        assert event["app"] == "bench"
