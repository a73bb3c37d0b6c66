"""Infrastructure layer - on-disk formats."""
