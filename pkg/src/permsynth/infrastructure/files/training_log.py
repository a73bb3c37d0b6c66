"""Training log: one JSON object per iteration (JSON lines)."""

from pathlib import Path
from types import TracebackType
from typing import IO, Optional

from pydantic import ValidationError

from permsynth.core.exceptions import FileFormatError
from permsynth.domain.entities.training import IterationLog


class TrainingLogWriter:
    """Append iteration records to a JSON-lines file, flushing after each line."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._handle: Optional[IO[str]] = None

    def __enter__(self) -> "TrainingLogWriter":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = open(self.path, "w", encoding="utf-8")
        return self

    def __exit__(
        self,
        exc_type: Optional[type[BaseException]],
        exc_val: Optional[BaseException],
        exc_tb: Optional[TracebackType],
    ) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def write(self, record: IterationLog) -> None:
        if self._handle is None:
            raise RuntimeError("TrainingLogWriter used outside its context")
        self._handle.write(record.model_dump_json() + "\n")
        self._handle.flush()


def read_training_log(path: Path) -> list[IterationLog]:
    """Parse a training log; blank lines are ignored."""
    path = Path(path)
    records: list[IterationLog] = []
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(IterationLog.model_validate_json(line))
            except ValidationError as e:
                raise FileFormatError(f"invalid log record: {e}", path, number) from e
    return records
