"""
Permutation text files.

Format::

    perm v1
    <mapping[0]> <mapping[1]> ... <mapping[n-1]>

``mapping[i]`` is the node currently holding the token destined for node
``i``. The image list may span several lines.
"""

from pathlib import Path
from typing import Any

import numpy as np

from permsynth.core.exceptions import FileFormatError
from permsynth.domain.entities.circuit import Permutation
from permsynth.infrastructure.files.text_format import (
    TEXT_FORMAT_VERSION,
    data_lines,
    parse_header,
    read_text,
    to_ints,
    write_text,
)


def parse_permutation(text: str, source: Any = "<text>") -> Permutation:
    """
    Parse permutation text. Bijectivity is checked later against a mask.

    Raises:
        FileFormatError: missing header, non-integer or empty image list
    """
    lines = data_lines(text)
    parse_header(lines, "perm", 0, source)
    images: list[int] = []
    for number, fields in lines:
        images.extend(to_ints(fields, source, number))
    if not images:
        raise FileFormatError("permutation has no entries", source)
    return np.array(images, dtype=np.int64)


def parse_inline_permutation(value: str) -> Permutation:
    """Parse ``"3,1,2,0"``, ``"3 1 2 0"`` or ``"[3, 1, 2, 0]"``."""
    fields = value.strip().strip("[]").replace(",", " ").split()
    if not fields:
        raise FileFormatError("permutation has no entries", "<argument>")
    return np.array(to_ints(fields, "<argument>", None), dtype=np.int64)


def load_permutation_argument(value: str) -> Permutation:
    """A CLI permutation argument: an existing file path or an inline list."""
    path = Path(value)
    if path.is_file():
        return read_permutation_file(path)
    return parse_inline_permutation(value)


def format_permutation(perm: Permutation) -> str:
    return f"perm v{TEXT_FORMAT_VERSION}\n" + " ".join(str(int(x)) for x in perm) + "\n"


def read_permutation_file(path: Path) -> Permutation:
    path = Path(path)
    return parse_permutation(read_text(path), path)


def write_permutation_file(perm: Permutation, path: Path) -> Path:
    return write_text(format_permutation(perm), path)
