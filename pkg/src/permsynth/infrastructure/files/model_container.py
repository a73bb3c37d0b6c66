"""
Binary model container.

Layout (little-endian)::

    magic            8 bytes  b"PSYNMDL\\0"
    format version   u16
    rows, cols       u16, u16
    encoding version u16
    hidden layers    u8, then one u32 width per layer
    parameter count  u64
    seed             u64
    parameters       parameter count x f32, storage order, row-major
    checksum         u32 CRC-32 of the parameter block
"""

import struct
import zlib
from pathlib import Path
from typing import Any

import numpy as np

from permsynth.core.exceptions import (
    ModelChecksumError,
    ModelFormatError,
    ModelTruncatedError,
    ModelVersionError,
)
from permsynth.core.logging import get_logger
from permsynth.domain.services.policy_network import (
    ENCODING_VERSION,
    PolicyNet,
    analytic_parameter_count,
    observation_size,
    parameter_shapes,
)
from permsynth.domain.entities.lattice import Lattice

logger = get_logger(__name__)

MAGIC = b"PSYNMDL\x00"
FORMAT_VERSION = 1
MODEL_EXTENSION = ".psm"

_FIXED = struct.Struct("<HHHHB")
_TAIL = struct.Struct("<QQ")
_CRC = struct.Struct("<I")


def encode_model(net: PolicyNet) -> bytes:
    """Serialise a network into container bytes."""
    header = MAGIC + _FIXED.pack(
        FORMAT_VERSION,
        net.lattice.rows,
        net.lattice.cols,
        ENCODING_VERSION,
        len(net.hidden_sizes),
    )
    header += struct.pack(f"<{len(net.hidden_sizes)}I", *net.hidden_sizes)
    header += _TAIL.pack(net.parameter_count, net.seed)
    block = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for p in net.params)
    return header + block + _CRC.pack(zlib.crc32(block))


def _read_header(data: bytes, source: Any) -> tuple[dict[str, Any], int]:
    """Parse and check the header; returns the fields and the parameter block offset."""
    if len(data) < len(MAGIC):
        raise ModelTruncatedError(f"{source}: file too short for a model container")
    if data[: len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"{source}: not a permsynth model container")
    offset = len(MAGIC)
    if len(data) < offset + _FIXED.size:
        raise ModelTruncatedError(f"{source}: header truncated")
    version, rows, cols, encoding, depth = _FIXED.unpack_from(data, offset)
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"{source}: container version {version}, supported {FORMAT_VERSION}")
    if encoding != ENCODING_VERSION:
        raise ModelVersionError(
            f"{source}: observation encoding version {encoding}, supported {ENCODING_VERSION}"
        )
    offset += _FIXED.size
    widths_size = 4 * depth
    if len(data) < offset + widths_size + _TAIL.size:
        raise ModelTruncatedError(f"{source}: header truncated")
    hidden = struct.unpack_from(f"<{depth}I", data, offset)
    offset += widths_size
    count, seed = _TAIL.unpack_from(data, offset)
    offset += _TAIL.size
    return {
        "format_version": version,
        "rows": rows,
        "cols": cols,
        "encoding_version": encoding,
        "hidden_sizes": tuple(hidden),
        "parameter_count": count,
        "seed": seed,
    }, offset


def decode_model(data: bytes, source: Any = "<bytes>") -> PolicyNet:
    """
    Rebuild a network from container bytes.

    Raises:
        ModelFormatError: bad magic, count mismatch or trailing bytes
        ModelVersionError: unsupported format or encoding version
        ModelTruncatedError: content ends early
        ModelChecksumError: parameter block corrupted
    """
    header, offset = _read_header(data, source)
    try:
        lattice = Lattice(rows=header["rows"], cols=header["cols"])
    except ValueError as e:
        raise ModelFormatError(f"{source}: invalid lattice dimensions in header") from e
    if not header["hidden_sizes"] or min(header["hidden_sizes"]) < 1:
        raise ModelFormatError(f"{source}: invalid hidden layer widths {header['hidden_sizes']}")
    expected = analytic_parameter_count(
        observation_size(lattice), header["hidden_sizes"], lattice.num_edges
    )
    if header["parameter_count"] != expected:
        raise ModelFormatError(
            f"{source}: header declares {header['parameter_count']} parameters, "
            f"layer dimensions imply {expected}"
        )

    block_size = 4 * expected
    end = offset + block_size + _CRC.size
    if len(data) < end:
        raise ModelTruncatedError(f"{source}: parameter block truncated")
    if len(data) > end:
        raise ModelFormatError(f"{source}: {len(data) - end} unexpected trailing bytes")
    block = data[offset : offset + block_size]
    (stored,) = _CRC.unpack_from(data, offset + block_size)
    if zlib.crc32(block) != stored:
        raise ModelChecksumError(f"{source}: parameter checksum mismatch")

    flat = np.frombuffer(block, dtype="<f4").astype(np.float32)
    params = []
    position = 0
    for shape in parameter_shapes(lattice, header["hidden_sizes"]):
        size = int(np.prod(shape))
        params.append(flat[position : position + size].reshape(shape).copy())
        position += size
    return PolicyNet(lattice.rows, lattice.cols, header["hidden_sizes"], params, seed=header["seed"])


def save_model(net: PolicyNet, path: Path) -> Path:
    """Write a network to ``path`` (parent directories are created)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_model(net))
    logger.info("Model saved", path=str(path), parameters=net.parameter_count)
    return path


def load_model(path: Path) -> PolicyNet:
    """Read a network written by ``save_model``."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ModelFormatError(f"{path}: cannot read model file: {e}") from e
    return decode_model(data, path)


def describe_model(path: Path) -> dict[str, Any]:
    """
    Container introspection for ``inspect``.

    Returns:
        Header fields plus file size, analytic parameter count and whether
        the checksum and declared count are consistent
    """
    path = Path(path)
    net = load_model(path)
    size = path.stat().st_size
    analytic = analytic_parameter_count(net.input_size, net.hidden_sizes, net.num_actions)
    return {
        "path": str(path),
        "format_version": FORMAT_VERSION,
        "encoding_version": ENCODING_VERSION,
        "rows": net.lattice.rows,
        "cols": net.lattice.cols,
        "input_size": net.input_size,
        "hidden_sizes": list(net.hidden_sizes),
        "num_actions": net.num_actions,
        "parameter_count": net.parameter_count,
        "analytic_parameter_count": analytic,
        "seed": net.seed,
        "file_size_bytes": size,
        "file_size_kb": round(size / 1024, 1),
    }
