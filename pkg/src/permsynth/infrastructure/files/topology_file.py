"""
Topology text files.

Format::

    topology v1 <rows> <cols>
    n <row> <col>                    # one line per active node
    e <row1> <col1> <row2> <col2>    # optional explicit active edges

Without ``e`` lines every lattice edge joining two listed nodes is active.
"""

from pathlib import Path
from typing import Any

from permsynth.core.exceptions import FileFormatError, InvalidArgumentError
from permsynth.domain.entities.lattice import Edge, Lattice, TopologyMask
from permsynth.domain.services.topology import build_lattice, mask_from_nodes
from permsynth.infrastructure.files.text_format import (
    TEXT_FORMAT_VERSION,
    data_lines,
    parse_header,
    read_text,
    to_ints,
    write_text,
)


def _node(lattice: Lattice, row: int, col: int, source: Any, line: int) -> int:
    try:
        return lattice.node_id(row, col)
    except InvalidArgumentError as e:
        raise FileFormatError(str(e), source, line) from None


def parse_topology(text: str, source: Any = "<text>") -> TopologyMask:
    """
    Parse topology text into a mask.

    Raises:
        FileFormatError: malformed text or coordinates outside the lattice
        InvalidTopologyError: the described subgraph is not a valid topology
    """
    lines = data_lines(text)
    rows, cols = parse_header(lines, "topology", 2, source)
    try:
        lattice = build_lattice(rows, cols)
    except InvalidArgumentError as e:
        raise FileFormatError(str(e), source, 1) from None

    nodes: list[int] = []
    edges: list[Edge] = []
    for number, fields in lines:
        kind, values = fields[0], to_ints(fields[1:], source, number)
        if kind == "n" and len(values) == 2:
            node = _node(lattice, *values, source, number)
            if node in nodes:
                raise FileFormatError(f"node ({values[0]}, {values[1]}) listed twice", source, number)
            nodes.append(node)
        elif kind == "e" and len(values) == 4:
            a = _node(lattice, values[0], values[1], source, number)
            b = _node(lattice, values[2], values[3], source, number)
            try:
                lattice.edge_index(a, b)
            except InvalidArgumentError as e:
                raise FileFormatError(str(e), source, number) from None
            edges.append((a, b))
        else:
            raise FileFormatError(f"unrecognised line {' '.join(fields)!r}", source, number)

    if not nodes:
        raise FileFormatError("topology lists no node", source)
    return mask_from_nodes(lattice, nodes, edges or None)


def format_topology(mask: TopologyMask) -> str:
    """Topology text; ``e`` lines are written only when the edge set is not induced."""
    lattice = mask.lattice
    lines = [f"topology v{TEXT_FORMAT_VERSION} {lattice.rows} {lattice.cols}"]
    for node in mask.active_node_ids:
        r, c = lattice.coords(int(node))
        lines.append(f"n {r} {c}")

    induced = mask_from_nodes(lattice, (int(n) for n in mask.active_node_ids))
    if induced.active_edges != mask.active_edges:
        for idx in mask.active_edge_ids:
            a, b = lattice.edges[int(idx)]
            lines.append("e {} {} {} {}".format(*lattice.coords(a), *lattice.coords(b)))
    return "\n".join(lines) + "\n"


def read_topology_file(path: Path) -> TopologyMask:
    path = Path(path)
    return parse_topology(read_text(path), path)


def write_topology_file(mask: TopologyMask, path: Path) -> Path:
    return write_text(format_topology(mask), path)
