"""Lattice and topology domain entities."""

from typing import Any, Literal

import networkx as nx
import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from permsynth.core.exceptions import InvalidArgumentError, InvalidTopologyError

Edge = tuple[int, int]
Coord = tuple[int, int]


def canonical_edges(rows: int, cols: int) -> tuple[Edge, ...]:
    """Edges of a rows x cols grid: horizontal edges row-major, then vertical row-major."""
    horizontal = [
        (r * cols + c, r * cols + c + 1) for r in range(rows) for c in range(cols - 1)
    ]
    vertical = [
        (r * cols + c, (r + 1) * cols + c) for r in range(rows - 1) for c in range(cols)
    ]
    return tuple(horizontal + vertical)


class Lattice(BaseModel):
    """Base square lattice; node ids are row-major, edges stored (low_id, high_id)."""

    model_config = ConfigDict(frozen=True)

    rows: int = Field(..., ge=1, description="Lattice rows")
    cols: int = Field(..., ge=1, description="Lattice columns")
    edges: tuple[Edge, ...] = Field(default=(), description="Canonical edge list")

    _edge_lookup: dict[Edge, int] = PrivateAttr(default_factory=dict)
    _incident: tuple[tuple[int, ...], ...] = PrivateAttr(default=())

    @model_validator(mode="before")
    @classmethod
    def fill_canonical_edges(cls, data: Any) -> Any:
        """Derive the edge list from the dimensions when it is not given."""
        if isinstance(data, dict) and not data.get("edges"):
            rows, cols = data.get("rows"), data.get("cols")
            if isinstance(rows, int) and isinstance(cols, int) and rows >= 1 and cols >= 1:
                data = {**data, "edges": canonical_edges(rows, cols)}
        return data

    @model_validator(mode="after")
    def check_edges(self) -> "Lattice":
        """Edges must be exactly the canonical list for the dimensions."""
        if self.rows * self.cols < 2:
            raise ValueError("lattice needs at least 2 nodes")
        if self.edges != canonical_edges(self.rows, self.cols):
            raise ValueError("edges are not the canonical list for these dimensions")
        return self

    def model_post_init(self, __context: Any) -> None:
        self._edge_lookup = {edge: idx for idx, edge in enumerate(self.edges)}
        incident: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for idx, (a, b) in enumerate(self.edges):
            if max(a, b) >= self.num_nodes:
                continue  # rejected by check_edges
            incident[a].append(idx)
            incident[b].append(idx)
        self._incident = tuple(tuple(items) for items in incident)

    @property
    def num_nodes(self) -> int:
        """Number of lattice nodes (rows * cols)."""
        return self.rows * self.cols

    @property
    def num_edges(self) -> int:
        """Number of lattice edges."""
        return len(self.edges)

    def coords(self, node: int) -> Coord:
        """Row/column of a node id."""
        if not 0 <= node < self.num_nodes:
            raise InvalidArgumentError(f"node {node} outside {self.rows}x{self.cols} lattice")
        return divmod(node, self.cols)

    def node_id(self, row: int, col: int) -> int:
        """Node id of a (row, col) coordinate."""
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise InvalidArgumentError(
                f"coordinate ({row}, {col}) outside {self.rows}x{self.cols} lattice"
            )
        return row * self.cols + col

    def edge_index(self, a: int, b: int) -> int:
        """Index of the lattice edge joining nodes a and b."""
        key = (a, b) if a < b else (b, a)
        try:
            return self._edge_lookup[key]
        except KeyError:
            raise InvalidArgumentError(f"({a}, {b}) is not a lattice edge") from None

    def incident_edges(self, node: int) -> tuple[int, ...]:
        """Indices of the edges touching a node."""
        return self._incident[node]


class TopologyMask(BaseModel):
    """Connected subgraph of a lattice: the usable nodes and edges (the action mask)."""

    model_config = ConfigDict(frozen=True)

    lattice: Lattice
    active_nodes: tuple[bool, ...]
    active_edges: tuple[bool, ...]

    _node_array: npt.NDArray[np.bool_] = PrivateAttr()
    _edge_array: npt.NDArray[np.bool_] = PrivateAttr()
    _node_ids: npt.NDArray[np.int64] = PrivateAttr()
    _edge_ids: npt.NDArray[np.int64] = PrivateAttr()

    @model_validator(mode="after")
    def check_topology(self) -> "TopologyMask":
        """Enforce endpoint activity, minimum size and connectivity."""
        lattice = self.lattice
        if len(self.active_nodes) != lattice.num_nodes:
            raise InvalidTopologyError(
                f"node mask has length {len(self.active_nodes)}, expected {lattice.num_nodes}"
            )
        if len(self.active_edges) != lattice.num_edges:
            raise InvalidTopologyError(
                f"edge mask has length {len(self.active_edges)}, expected {lattice.num_edges}"
            )
        nodes = [n for n, on in enumerate(self.active_nodes) if on]
        if not nodes:
            raise InvalidTopologyError("topology has no active node")

        graph = nx.Graph()
        graph.add_nodes_from(nodes)
        for idx, on in enumerate(self.active_edges):
            if not on:
                continue
            a, b = lattice.edges[idx]
            if not (self.active_nodes[a] and self.active_nodes[b]):
                raise InvalidTopologyError(f"active edge ({a}, {b}) has an inactive endpoint")
            graph.add_edge(a, b)

        if len(nodes) >= 2 and graph.number_of_edges() == 0:
            raise InvalidTopologyError("topology with 2+ nodes has no active edge")
        if not nx.is_connected(graph):
            raise InvalidTopologyError("topology is not connected")
        return self

    def model_post_init(self, __context: Any) -> None:
        node_array = np.array(self.active_nodes, dtype=bool)
        edge_array = np.array(self.active_edges, dtype=bool)
        node_array.flags.writeable = False
        edge_array.flags.writeable = False
        self._node_array = node_array
        self._edge_array = edge_array
        self._node_ids = np.flatnonzero(node_array)
        self._edge_ids = np.flatnonzero(edge_array)

    # the cached arrays are derived state and must stay out of comparisons
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TopologyMask):
            return NotImplemented
        return (self.lattice, self.active_nodes, self.active_edges) == (
            other.lattice,
            other.active_nodes,
            other.active_edges,
        )

    def __hash__(self) -> int:
        return hash((self.lattice.rows, self.lattice.cols, self.active_nodes, self.active_edges))

    @property
    def node_mask(self) -> npt.NDArray[np.bool_]:
        """Read-only boolean vector over lattice nodes."""
        return self._node_array

    @property
    def edge_mask(self) -> npt.NDArray[np.bool_]:
        """Read-only boolean vector over lattice edges."""
        return self._edge_array

    @property
    def active_node_ids(self) -> npt.NDArray[np.int64]:
        """Sorted ids of active nodes."""
        return self._node_ids

    @property
    def active_edge_ids(self) -> npt.NDArray[np.int64]:
        """Sorted indices of active edges."""
        return self._edge_ids

    @property
    def num_active_nodes(self) -> int:
        return int(self._node_ids.size)

    @property
    def num_active_edges(self) -> int:
        return int(self._edge_ids.size)

    def is_active_edge(self, edge: int) -> bool:
        """Whether an edge index is usable under this mask."""
        return 0 <= edge < self.lattice.num_edges and self.active_edges[edge]


class TopologyPreset(BaseModel):
    """Named topology given by lattice coordinates (e.g. 7qL, 12qO)."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    node_coords: tuple[Coord, ...] = Field(..., min_length=1)
    edge_rule: Literal["induced", "explicit"] = "induced"
    edges: tuple[tuple[Coord, Coord], ...] = ()
    description: str = ""

    @model_validator(mode="after")
    def check_coords(self) -> "TopologyPreset":
        """Coordinates must be unique; explicit edges must join listed coordinates."""
        if len(set(self.node_coords)) != len(self.node_coords):
            raise ValueError(f"preset {self.name} lists a coordinate twice")
        if self.edge_rule == "explicit":
            known = set(self.node_coords)
            for a, b in self.edges:
                if a not in known or b not in known:
                    raise ValueError(f"preset {self.name} edge {a}-{b} uses unknown coordinates")
        elif self.edges:
            raise ValueError(f"preset {self.name} is induced but lists explicit edges")
        return self

    @property
    def num_nodes(self) -> int:
        return len(self.node_coords)


class Embedding(BaseModel):
    """A preset placed on a lattice: its mask plus the node holding each preset coordinate."""

    model_config = ConfigDict(frozen=True)

    mask: TopologyMask
    nodes: tuple[int, ...] = Field(..., description="Lattice node of preset coordinate i")
