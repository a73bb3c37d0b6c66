"""Lattice construction, topology masks, presets, embeddings and graph metrics."""

from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Optional

import networkx as nx
import numpy as np
import numpy.typing as npt

from permsynth.core.config_loader import get_topology_catalog
from permsynth.core.exceptions import InvalidArgumentError, InvalidTopologyError
from permsynth.core.logging import get_logger
from permsynth.domain.entities.circuit import Permutation
from permsynth.domain.entities.lattice import (
    Coord,
    Edge,
    Embedding,
    Lattice,
    TopologyMask,
    TopologyPreset,
)

logger = get_logger(__name__)

# The eight symmetries of the square acting on (row, col)
_DIHEDRAL = (
    lambda r, c: (r, c),
    lambda r, c: (c, -r),
    lambda r, c: (-r, -c),
    lambda r, c: (-c, r),
    lambda r, c: (r, -c),
    lambda r, c: (-r, c),
    lambda r, c: (c, r),
    lambda r, c: (-c, -r),
)


def build_lattice(rows: int, cols: int) -> Lattice:
    """
    Build the base square lattice.

    Raises:
        InvalidArgumentError: if a dimension is < 1 or the lattice has < 2 nodes
    """
    if rows < 1 or cols < 1:
        raise InvalidArgumentError(f"lattice dimensions must be positive, got {rows}x{cols}")
    if rows * cols < 2:
        raise InvalidArgumentError("lattice needs at least 2 nodes")
    return Lattice(rows=rows, cols=cols)


def full_mask(lattice: Lattice) -> TopologyMask:
    """Mask with every node and edge active."""
    return TopologyMask(
        lattice=lattice,
        active_nodes=(True,) * lattice.num_nodes,
        active_edges=(True,) * lattice.num_edges,
    )


def mask_from_nodes(
    lattice: Lattice, nodes: Iterable[int], edges: Optional[Iterable[Edge]] = None
) -> TopologyMask:
    """
    Build a mask from node ids.

    Args:
        lattice: Base lattice
        nodes: Active node ids
        edges: Explicit active edges as node pairs; None activates the induced edges

    Raises:
        InvalidArgumentError: unknown node id or non-lattice edge
        InvalidTopologyError: resulting mask is not a valid connected topology
    """
    node_set = set(nodes)
    for n in node_set:
        if not 0 <= n < lattice.num_nodes:
            raise InvalidArgumentError(f"node {n} outside {lattice.rows}x{lattice.cols} lattice")
    active_nodes = tuple(n in node_set for n in range(lattice.num_nodes))

    if edges is None:
        active_edges = tuple(a in node_set and b in node_set for a, b in lattice.edges)
    else:
        chosen = {lattice.edge_index(a, b) for a, b in edges}
        active_edges = tuple(i in chosen for i in range(lattice.num_edges))

    return TopologyMask(lattice=lattice, active_nodes=active_nodes, active_edges=active_edges)


def sample_connected_mask(
    lattice: Lattice, size_range: tuple[int, int], rng: np.random.Generator
) -> TopologyMask:
    """
    Sample a random connected induced subgraph.

    The node count is uniform in ``size_range``; growth starts at a uniform
    random node and repeatedly takes a uniform random frontier edge (an edge
    with exactly one active endpoint), activating its outside endpoint.
    """
    lo, hi = size_range
    if not 1 <= lo <= hi <= lattice.num_nodes:
        raise InvalidArgumentError(
            f"size_range {size_range} must satisfy 1 <= min <= max <= {lattice.num_nodes}"
        )

    k = int(rng.integers(lo, hi + 1))
    active = [False] * lattice.num_nodes
    active[int(rng.integers(lattice.num_nodes))] = True
    count = 1
    while count < k:
        frontier = [(a, b) for a, b in lattice.edges if active[a] != active[b]]
        a, b = frontier[int(rng.integers(len(frontier)))]
        active[b if active[a] else a] = True
        count += 1

    return TopologyMask(
        lattice=lattice,
        active_nodes=tuple(active),
        active_edges=tuple(active[a] and active[b] for a, b in lattice.edges),
    )


def _place(
    preset: TopologyPreset,
    lattice: Lattice,
    coords: Sequence[Coord],
    edges: Sequence[tuple[Coord, Coord]],
) -> Embedding:
    """Embedding for preset coordinates already mapped onto lattice positions."""
    for r, c in coords:
        if not (0 <= r < lattice.rows and 0 <= c < lattice.cols):
            raise InvalidArgumentError(
                f"preset {preset.name} coordinate ({r}, {c}) outside "
                f"{lattice.rows}x{lattice.cols} lattice"
            )
    nodes = tuple(lattice.node_id(r, c) for r, c in coords)
    explicit: Optional[list[Edge]] = None
    if preset.edge_rule == "explicit":
        explicit = []
        for (r1, c1), (r2, c2) in edges:
            if abs(r1 - r2) + abs(c1 - c2) != 1:
                raise InvalidArgumentError(
                    f"preset {preset.name} edge ({r1},{c1})-({r2},{c2}) is not a lattice edge"
                )
            explicit.append((lattice.node_id(r1, c1), lattice.node_id(r2, c2)))
    try:
        mask = mask_from_nodes(lattice, nodes, explicit)
    except InvalidTopologyError as e:
        raise InvalidTopologyError(f"preset {preset.name}: {e}") from e
    return Embedding(mask=mask, nodes=nodes)


def canonical_embedding(preset: TopologyPreset, lattice: Lattice) -> Embedding:
    """The preset at its own coordinates."""
    return _place(preset, lattice, preset.node_coords, preset.edges)


def resolve_preset(preset: TopologyPreset, lattice: Lattice) -> TopologyMask:
    """
    Place a preset at its own coordinates.

    Raises:
        InvalidArgumentError: a coordinate lies outside the lattice
        InvalidTopologyError: the placed topology is disconnected
    """
    return canonical_embedding(preset, lattice).mask


def preset_embeddings(preset: TopologyPreset, lattice: Lattice) -> list[Embedding]:
    """
    Every distinct placement of a preset: dihedral images times fitting translations.

    Symmetric presets yield several embeddings with the same mask but a
    different node correspondence.

    Returns:
        Embeddings sorted by their node tuples (deterministic order)

    Raises:
        InvalidTopologyError: no placement fits the lattice
    """
    seen: dict[tuple[int, ...], Embedding] = {}
    for transform in _DIHEDRAL:
        image = [transform(r, c) for r, c in preset.node_coords]
        min_r = min(r for r, _ in image)
        min_c = min(c for _, c in image)
        image = [(r - min_r, c - min_c) for r, c in image]
        height = max(r for r, _ in image) + 1
        width = max(c for _, c in image) + 1
        edge_image = []
        for a, b in preset.edges:
            ta, tb = transform(*a), transform(*b)
            edge_image.append(((ta[0] - min_r, ta[1] - min_c), (tb[0] - min_r, tb[1] - min_c)))

        for dr in range(lattice.rows - height + 1):
            for dc in range(lattice.cols - width + 1):
                coords = [(r + dr, c + dc) for r, c in image]
                edges = [((a[0] + dr, a[1] + dc), (b[0] + dr, b[1] + dc)) for a, b in edge_image]
                embedding = _place(preset, lattice, coords, edges)
                seen.setdefault(embedding.nodes, embedding)

    if not seen:
        raise InvalidTopologyError(
            f"preset {preset.name} does not fit a {lattice.rows}x{lattice.cols} lattice"
        )
    logger.debug("Preset embeddings enumerated", preset=preset.name, placements=len(seen))
    return [seen[key] for key in sorted(seen)]


def random_embedding(
    preset: TopologyPreset, lattice: Lattice, rng: np.random.Generator
) -> Embedding:
    """Uniformly chosen placement among ``preset_embeddings``."""
    placements = preset_embeddings(preset, lattice)
    return placements[int(rng.integers(len(placements)))]


def mask_embedding(mask: TopologyMask) -> Embedding:
    """Trivial embedding of a mask onto itself (for topologies without a preset)."""
    return Embedding(mask=mask, nodes=tuple(int(n) for n in mask.active_node_ids))


def transport_permutation(perm: Permutation, source: Embedding, target: Embedding) -> Permutation:
    """
    Carry a permutation between two placements of the same preset.

    Token destined for source node ``source.nodes[i]`` and held at
    ``source.nodes[j]`` becomes a token destined for ``target.nodes[i]``
    held at ``target.nodes[j]``.
    """
    if len(source.nodes) != len(target.nodes):
        raise InvalidArgumentError("embeddings place different numbers of nodes")
    position = {node: i for i, node in enumerate(source.nodes)}
    out = np.arange(target.mask.lattice.num_nodes, dtype=np.int64)
    for i, node in enumerate(source.nodes):
        out[target.nodes[i]] = target.nodes[position[int(perm[node])]]
    return out


def mask_to_graph(mask: TopologyMask) -> nx.Graph:
    """networkx graph of the active nodes and edges."""
    graph = nx.Graph()
    graph.add_nodes_from(int(n) for n in mask.active_node_ids)
    graph.add_edges_from(mask.lattice.edges[int(e)] for e in mask.active_edge_ids)
    return graph


def all_pairs_distances(mask: TopologyMask) -> npt.NDArray[np.int64]:
    """
    Shortest-path hop counts over active edges.

    Returns:
        Symmetric (N, N) matrix indexed by lattice node id; entries involving an
        inactive node are -1, the diagonal of active nodes is 0.
    """
    n = mask.lattice.num_nodes
    dist = np.full((n, n), -1, dtype=np.int64)
    for source, lengths in nx.all_pairs_shortest_path_length(mask_to_graph(mask)):
        for target, hops in lengths.items():
            dist[source, target] = hops
    return dist


def resolve_topology(topology_ref: str, lattice: Lattice, presets_file: Optional[Path] = None) -> TopologyMask:
    """
    Resolve a topology reference: ``full``, a preset name, or a topology file path.

    Raises:
        ConfigError: unknown preset and no such file
    """
    if topology_ref == "full":
        return full_mask(lattice)

    catalog = get_topology_catalog(presets_file)
    path = Path(topology_ref)
    if topology_ref in catalog or not path.exists():
        # unknown names raise ConfigError listing the known presets
        return resolve_preset(catalog.get(topology_ref), lattice)

    from permsynth.infrastructure.files.topology_file import read_topology_file

    mask = read_topology_file(path)
    if mask.lattice != lattice:
        raise InvalidArgumentError(
            f"{path} is a {mask.lattice.rows}x{mask.lattice.cols} topology, "
            f"expected {lattice.rows}x{lattice.cols}"
        )
    return mask
