"""Exact minimum swap count by bidirectional breadth-first search."""

from dataclasses import dataclass
from typing import Optional

from permsynth.core.exceptions import CapacityError
from permsynth.core.logging import get_logger
from permsynth.domain.entities.circuit import Permutation, SwapCircuit
from permsynth.domain.entities.lattice import TopologyMask
from permsynth.domain.services.environment import validate_permutation

logger = get_logger(__name__)

MAX_ACTIVE_NODES = 10

# state -> (previous state, lattice edge index) on the path back to the search root
_Parents = dict[bytes, Optional[tuple[bytes, int]]]


@dataclass(frozen=True)
class OracleResult:
    """Optimal swap count with one circuit achieving it."""

    swaps: int
    circuit: SwapCircuit


def _swap(state: bytes, a: int, b: int) -> bytes:
    buf = bytearray(state)
    buf[a], buf[b] = buf[b], buf[a]
    return bytes(buf)


def _chain(parents: _Parents, state: bytes) -> list[int]:
    """Edges walked from ``state`` back to the root of ``parents``."""
    edges = []
    link = parents[state]
    while link is not None:
        state, edge = link
        edges.append(edge)
        link = parents[state]
    return edges


def bfs_optimal(perm: Permutation, mask: TopologyMask) -> OracleResult:
    """
    Minimum number of active-edge swaps taking ``perm`` to identity.

    States are token vectors over the active nodes (a byte per node). Both
    frontiers grow one whole level at a time and the shortest meeting of a
    level is kept.

    Raises:
        CapacityError: more than ``MAX_ACTIVE_NODES`` active nodes
        InvalidArgumentError: invalid permutation
    """
    active = [int(n) for n in mask.active_node_ids]
    if len(active) > MAX_ACTIVE_NODES:
        raise CapacityError(len(active), MAX_ACTIVE_NODES)
    perm = validate_permutation(perm, mask)

    local = {node: i for i, node in enumerate(active)}
    tokens = [0] * len(active)
    for destination in active:
        tokens[local[int(perm[destination])]] = local[destination]
    moves = [
        (local[a], local[b], int(e))
        for e in mask.active_edge_ids
        for a, b in [mask.lattice.edges[int(e)]]
    ]

    start = bytes(tokens)
    goal = bytes(range(len(active)))
    if start == goal:
        return OracleResult(swaps=0, circuit=SwapCircuit.from_actions([], perm, mask))

    forward: _Parents = {start: None}
    backward: _Parents = {goal: None}
    forward_frontier = [start]
    backward_frontier = [goal]
    forward_depth = backward_depth = 0
    meeting: Optional[bytes] = None
    best = -1

    while meeting is None and forward_frontier and backward_frontier:
        grow_forward = len(forward_frontier) <= len(backward_frontier)
        if grow_forward:
            own, other, frontier = forward, backward, forward_frontier
        else:
            own, other, frontier = backward, forward, backward_frontier
        next_frontier = []
        for state in frontier:
            for a, b, edge in moves:
                child = _swap(state, a, b)
                if child in own:
                    continue
                own[child] = (state, edge)
                next_frontier.append(child)
                if child in other:
                    total = len(_chain(forward, child)) + len(_chain(backward, child))
                    if meeting is None or total < best:
                        meeting, best = child, total
        if grow_forward:
            forward_frontier = next_frontier
            forward_depth += 1
        else:
            backward_frontier = next_frontier
            backward_depth += 1

    assert meeting is not None, "connected masks always reach identity"
    actions = list(reversed(_chain(forward, meeting))) + _chain(backward, meeting)
    logger.debug(
        "Exact search finished",
        active_nodes=len(active),
        swaps=len(actions),
        visited=len(forward) + len(backward),
        levels=forward_depth + backward_depth,
    )
    return OracleResult(swaps=len(actions), circuit=SwapCircuit.from_actions(actions, perm, mask))
