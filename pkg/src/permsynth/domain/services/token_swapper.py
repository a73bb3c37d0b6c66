"""
Randomized approximate token swapping.

Every node holds a token that must reach its destination node. The
potential of a state is the sum of token-to-destination distances. A trial
repeats until the potential is zero:

- if some active edge swap lowers the potential by 2 (both tokens move
  closer, a "happy" swap) apply one such swap chosen uniformly;
- otherwise move a uniformly chosen unfinished token one step along a
  random shortest path. A token moved this way is not moved again by this
  rule until the next happy swap.

When every unfinished token is locked by that rule the trial is finished
by routing tokens to the leaves of a spanning tree, so every trial ends
with a correct circuit. The best trial by (gates, depth) is returned.
"""

from typing import Optional

import networkx as nx
import numpy as np

from permsynth.core.exceptions import InvalidArgumentError
from permsynth.core.logging import get_logger
from permsynth.domain.entities.circuit import Permutation, SwapCircuit
from permsynth.domain.entities.lattice import TopologyMask
from permsynth.domain.services.environment import validate_permutation
from permsynth.domain.services.topology import all_pairs_distances, mask_to_graph

logger = get_logger(__name__)

DEFAULT_TRIALS = 1000


class _Board:
    """Token placement over the active nodes of one mask (shared by every trial)."""

    def __init__(self, mask: TopologyMask):
        self.mask = mask
        self.lattice = mask.lattice
        self.dist: list[list[int]] = all_pairs_distances(mask).tolist()
        self.edges = [int(e) for e in mask.active_edge_ids]
        self.endpoints = {e: self.lattice.edges[e] for e in self.edges}
        self.neighbors: dict[int, list[tuple[int, int]]] = {int(n): [] for n in mask.active_node_ids}
        self.incident: dict[int, list[int]] = {int(n): [] for n in mask.active_node_ids}
        for e in self.edges:
            a, b = self.endpoints[e]
            self.neighbors[a].append((b, e))
            self.neighbors[b].append((a, e))
            self.incident[a].append(e)
            self.incident[b].append(e)
        self.graph = mask_to_graph(mask)

    def potential(self, tokens: list[int]) -> int:
        return sum(self.dist[v][tokens[v]] for v in self.neighbors)

    def gain(self, tokens: list[int], edge: int) -> int:
        """Change of the potential if the tokens across ``edge`` are exchanged."""
        a, b = self.endpoints[edge]
        ta, tb = tokens[a], tokens[b]
        dist = self.dist
        return dist[b][ta] - dist[a][ta] + dist[a][tb] - dist[b][tb]


def _tokens_from(perm: Permutation) -> list[int]:
    """tokens[v] = destination of the token currently at node v."""
    tokens = [0] * len(perm)
    for destination, holder in enumerate(perm):
        tokens[int(holder)] = destination
    return tokens


def _finish_on_tree(board: _Board, tokens: list[int], swaps: list[int]) -> None:
    """Complete a trial by fixing spanning-tree leaves one at a time."""
    tree = nx.Graph(nx.bfs_tree(board.graph, min(board.neighbors)))
    tree.add_nodes_from(board.neighbors)
    holder = {tokens[v]: v for v in board.neighbors}
    while tree.number_of_nodes() > 1:
        leaf = min(v for v in tree.nodes if tree.degree(v) == 1)
        path = nx.shortest_path(tree, holder[leaf], leaf)
        for u, v in zip(path, path[1:]):
            swaps.append(board.lattice.edge_index(u, v))
            tokens[u], tokens[v] = tokens[v], tokens[u]
            holder[tokens[u]] = u
            holder[tokens[v]] = v
        tree.remove_node(leaf)


def _run_trial(board: _Board, start: list[int], rng: np.random.Generator) -> list[int]:
    """One randomized trial; returns the edge indices applied, in order."""
    tokens = list(start)
    swaps: list[int] = []
    dist = board.dist
    happy = {e for e in board.edges if board.gain(tokens, e) == -2}
    locked: set[int] = set()
    unfinished = {v for v in board.neighbors if tokens[v] != v}

    def apply(edge: int) -> None:
        a, b = board.endpoints[edge]
        tokens[a], tokens[b] = tokens[b], tokens[a]
        swaps.append(edge)
        for node in (a, b):
            if tokens[node] == node:
                unfinished.discard(node)
            else:
                unfinished.add(node)
        for touched in set(board.incident[a]) | set(board.incident[b]):
            if board.gain(tokens, touched) == -2:
                happy.add(touched)
            else:
                happy.discard(touched)

    while unfinished:
        if happy:
            choices = sorted(happy)
            apply(choices[int(rng.integers(len(choices)))])
            locked.clear()
            continue

        movable = sorted(v for v in unfinished if tokens[v] not in locked)
        if not movable:
            _finish_on_tree(board, tokens, swaps)
            break
        node = movable[int(rng.integers(len(movable)))]
        token = tokens[node]
        closer = [
            edge for neighbor, edge in board.neighbors[node] if dist[neighbor][token] < dist[node][token]
        ]
        locked.add(token)
        apply(closer[int(rng.integers(len(closer)))])
    return swaps


def token_swap(
    perm: Permutation,
    mask: TopologyMask,
    trials: int = DEFAULT_TRIALS,
    rng: Optional[np.random.Generator] = None,
) -> SwapCircuit:
    """
    Best-of-``trials`` randomized token swapping.

    Trial i uses the i-th seed drawn from ``rng``, so more trials never
    return a worse circuit under the same stream.

    Raises:
        InvalidArgumentError: invalid permutation or trials < 1
    """
    if trials < 1:
        raise InvalidArgumentError(f"trials must be >= 1, got {trials}")
    perm = validate_permutation(perm, mask)
    if rng is None:
        rng = np.random.default_rng()

    board = _Board(mask)
    start = _tokens_from(perm)
    best: Optional[tuple[int, int]] = None
    best_circuit: Optional[SwapCircuit] = None
    for _ in range(trials):
        stream = np.random.default_rng(int(rng.integers(0, 2**63 - 1)))
        circuit = SwapCircuit.from_actions(_run_trial(board, start, stream), perm, mask)
        key = (circuit.gate_count, circuit.depth)
        if best is None or key < best:
            best, best_circuit = key, circuit

    assert best_circuit is not None
    logger.debug(
        "Token swapping finished",
        trials=trials,
        gates=best_circuit.gate_count,
        depth=best_circuit.depth,
        potential=board.potential(start),
    )
    return best_circuit
