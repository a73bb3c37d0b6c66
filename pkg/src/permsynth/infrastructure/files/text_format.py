"""Shared reader for the line-oriented text formats (topology, permutation, circuit)."""

from collections.abc import Iterator
from pathlib import Path
from typing import Any

from permsynth.core.exceptions import FileFormatError

TEXT_FORMAT_VERSION = 1


def data_lines(text: str) -> Iterator[tuple[int, list[str]]]:
    """Yield (line number, whitespace-split fields), skipping blanks and ``#`` comments."""
    for number, raw in enumerate(text.splitlines(), start=1):
        fields = raw.split("#", 1)[0].split()
        if fields:
            yield number, fields


def to_ints(fields: list[str], source: Any, line: int) -> list[int]:
    try:
        return [int(f) for f in fields]
    except ValueError:
        raise FileFormatError(f"expected integers, got {' '.join(fields)!r}", source, line) from None


def parse_header(
    lines: Iterator[tuple[int, list[str]]], kind: str, arity: int, source: Any
) -> list[int]:
    """
    Consume the ``<kind> v<version> <ints...>`` header line.

    Raises:
        FileFormatError: missing header, wrong kind, unsupported version or arity
    """
    try:
        number, fields = next(lines)
    except StopIteration:
        expected = f"{kind} v{TEXT_FORMAT_VERSION}"
        raise FileFormatError(f"empty file, expected '{expected}' header", source) from None
    if fields[0] != kind:
        raise FileFormatError(f"expected '{kind}' header, got {fields[0]!r}", source, number)
    if len(fields) < 2 or fields[1] != f"v{TEXT_FORMAT_VERSION}":
        version = fields[1] if len(fields) > 1 else "none"
        raise FileFormatError(f"unsupported {kind} format version {version}", source, number)
    if len(fields) != 2 + arity:
        raise FileFormatError(f"{kind} header needs {arity} values", source, number)
    return to_ints(fields[2:], source, number)


def read_text(path: Path) -> str:
    path = Path(path)
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise FileFormatError(f"cannot read file: {e}", path) from e


def write_text(text: str, path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise FileFormatError(f"cannot write file: {e}", path) from e
    return path
