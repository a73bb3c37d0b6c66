"""Swap circuit and synthesis result entities."""

from collections.abc import Sequence

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, field_validator

from permsynth.domain.entities.lattice import Edge, TopologyMask

Permutation = npt.NDArray[np.int64]


def circuit_depth(gates: Sequence[Edge]) -> int:
    """ASAP layering depth of a gate sequence.

    A gate is placed one layer after the latest layer touching either of its
    endpoints; gates sharing no qubit may share a layer.
    """
    last_layer: dict[int, int] = {}
    depth = 0
    for a, b in gates:
        layer = 1 + max(last_layer.get(a, 0), last_layer.get(b, 0))
        last_layer[a] = layer
        last_layer[b] = layer
        depth = max(depth, layer)
    return depth


class SwapCircuit(BaseModel):
    """Ordered SWAP gates (execution order) implementing a source permutation on a mask."""

    model_config = ConfigDict(frozen=True)

    gates: tuple[Edge, ...] = ()
    source: tuple[int, ...]
    mask: TopologyMask

    @field_validator("gates")
    @classmethod
    def normalize_gates(cls, v: tuple[Edge, ...]) -> tuple[Edge, ...]:
        """Store every gate as (low, high)."""
        return tuple((a, b) if a < b else (b, a) for a, b in v)

    @classmethod
    def from_actions(
        cls, actions: Sequence[int], source: Permutation, mask: TopologyMask
    ) -> "SwapCircuit":
        """Build the circuit from the edge indices that reduced ``source`` to identity.

        Each swap is its own inverse, so inverting the action sequence only
        reverses its order.
        """
        edges = mask.lattice.edges
        gates = tuple(edges[a] for a in reversed(actions))
        return cls(gates=gates, source=tuple(int(x) for x in source), mask=mask)

    @property
    def gate_count(self) -> int:
        return len(self.gates)

    @property
    def depth(self) -> int:
        return circuit_depth(self.gates)

    @property
    def source_permutation(self) -> Permutation:
        return np.array(self.source, dtype=np.int64)


class SynthesisResult(BaseModel):
    """Outcome of one synthesize call; ``circuit`` is None on failure."""

    model_config = ConfigDict(frozen=True)

    circuit: SwapCircuit | None = None
    attempts_used: int = Field(default=0, ge=0)
    successful_attempts: int = Field(default=0, ge=0)
    wall_time_ns: int = Field(default=0, ge=0)

    @property
    def succeeded(self) -> bool:
        return self.circuit is not None
