"""Run manifest persistence."""

from pathlib import Path

from pydantic import ValidationError

from permsynth.core.exceptions import FileFormatError
from permsynth.core.logging import get_logger
from permsynth.domain.entities.manifest import RunManifest

logger = get_logger(__name__)

MANIFEST_NAME = "manifest.json"


def write_manifest(manifest: RunManifest, directory: Path, name: str = MANIFEST_NAME) -> Path:
    """Write the manifest as indented JSON inside ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / name
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.debug("Manifest written", path=str(path), command=manifest.command)
    return path


def read_manifest(path: Path) -> RunManifest:
    """Load a manifest written by ``write_manifest``."""
    path = Path(path)
    try:
        return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise FileFormatError(f"invalid manifest: {e}", path) from e
