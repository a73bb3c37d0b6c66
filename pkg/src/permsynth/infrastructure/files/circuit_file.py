"""
Circuit text files.

Format::

    circuit v1 <rows> <cols> <gates> <depth>
    swap <node_a> <node_b>    # one line per gate, execution order

The source permutation is not stored: it is what the gates implement when
run on the identity wiring, so the parser recomputes it.
"""

from pathlib import Path
from typing import Any

from permsynth.core.exceptions import FileFormatError, InvalidArgumentError
from permsynth.domain.entities.circuit import SwapCircuit, circuit_depth
from permsynth.domain.entities.lattice import Edge, TopologyMask
from permsynth.domain.services.environment import apply_swap, identity_permutation
from permsynth.infrastructure.files.text_format import (
    TEXT_FORMAT_VERSION,
    data_lines,
    parse_header,
    read_text,
    to_ints,
    write_text,
)


def format_circuit(circuit: SwapCircuit) -> str:
    lattice = circuit.mask.lattice
    lines = [
        f"circuit v{TEXT_FORMAT_VERSION} {lattice.rows} {lattice.cols} "
        f"{circuit.gate_count} {circuit.depth}"
    ]
    lines.extend(f"swap {a} {b}" for a, b in circuit.gates)
    return "\n".join(lines) + "\n"


def parse_circuit(text: str, mask: TopologyMask, source: Any = "<text>") -> SwapCircuit:
    """
    Parse circuit text for a topology.

    Gates must be lattice edges; whether they are active under ``mask`` is
    left to ``verify``.

    Raises:
        FileFormatError: malformed text, lattice mismatch, header counts that
            disagree with the gate lines
    """
    lattice = mask.lattice
    lines = data_lines(text)
    rows, cols, gate_count, depth = parse_header(lines, "circuit", 4, source)
    if (rows, cols) != (lattice.rows, lattice.cols):
        raise FileFormatError(
            f"circuit is for a {rows}x{cols} lattice, topology is {lattice.rows}x{lattice.cols}",
            source,
            1,
        )

    gates: list[Edge] = []
    perm = identity_permutation(lattice.num_nodes)
    for number, fields in lines:
        if fields[0] != "swap" or len(fields) != 3:
            raise FileFormatError(f"expected 'swap <a> <b>', got {' '.join(fields)!r}", source, number)
        a, b = to_ints(fields[1:], source, number)
        try:
            lattice.edge_index(a, b)
        except InvalidArgumentError as e:
            raise FileFormatError(str(e), source, number) from None
        gates.append((a, b))
        perm = apply_swap(perm, (a, b))

    if len(gates) != gate_count or circuit_depth(gates) != depth:
        raise FileFormatError(
            f"header declares {gate_count} gates / depth {depth}, "
            f"body has {len(gates)} gates / depth {circuit_depth(gates)}",
            source,
        )
    return SwapCircuit(gates=tuple(gates), source=tuple(int(x) for x in perm), mask=mask)


def read_circuit_file(path: Path, mask: TopologyMask) -> SwapCircuit:
    path = Path(path)
    return parse_circuit(read_text(path), mask, path)


def write_circuit_file(circuit: SwapCircuit, path: Path) -> Path:
    return write_text(format_circuit(circuit), path)
