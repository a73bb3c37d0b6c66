"""Permutation synthesis environment: swap dynamics, rewards, instances and curriculum."""

from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np

from permsynth.core.exceptions import ContractViolationError, InvalidArgumentError
from permsynth.core.logging import get_logger
from permsynth.domain.entities.circuit import Permutation
from permsynth.domain.entities.lattice import Edge, TopologyMask
from permsynth.domain.entities.training import CurriculumState, RewardConfig

logger = get_logger(__name__)


def identity_permutation(n: int) -> Permutation:
    """Identity mapping over n nodes."""
    return np.arange(n, dtype=np.int64)


def is_identity(perm: Permutation) -> bool:
    """Whether every token already sits on its destination."""
    return bool(np.array_equal(perm, np.arange(perm.shape[0])))


def validate_permutation(perm: Sequence[int] | Permutation, mask: TopologyMask) -> Permutation:
    """
    Check a permutation against a mask.

    Returns:
        The permutation as an int64 array

    Raises:
        InvalidArgumentError: wrong length, not a bijection, or an inactive node moved
    """
    arr = np.asarray(perm, dtype=np.int64)
    n = mask.lattice.num_nodes
    if arr.shape != (n,):
        raise InvalidArgumentError(f"permutation must list {n} images, got {arr.size}")
    if not np.array_equal(np.sort(arr), np.arange(n)):
        raise InvalidArgumentError("permutation is not a bijection on the lattice nodes")
    moved = np.flatnonzero((arr != np.arange(n)) & ~mask.node_mask)
    if moved.size:
        raise InvalidArgumentError(
            f"permutation moves inactive nodes {moved.tolist()}; inactive nodes must be fixed"
        )
    return arr


def apply_swap(perm: Permutation, edge: Edge) -> Permutation:
    """Exchange the tokens sitting on the two endpoints of an edge."""
    a, b = edge
    return np.where(perm == a, b, np.where(perm == b, a, perm))


def sample_instance(
    mask: TopologyMask, difficulty: int, rng: np.random.Generator
) -> Permutation:
    """
    Scramble the identity with ``difficulty`` random active-edge swaps.

    The edge used by the previous swap is never picked next (immediate-undo
    suppression) unless the mask has a single active edge.

    Raises:
        InvalidArgumentError: negative difficulty, or difficulty >= 1 on an edgeless mask
    """
    if difficulty < 0:
        raise InvalidArgumentError(f"difficulty must be >= 0, got {difficulty}")
    perm = identity_permutation(mask.lattice.num_nodes)
    if difficulty == 0:
        return perm

    edges = mask.active_edge_ids
    if edges.size == 0:
        raise InvalidArgumentError("cannot scramble on a topology without active edges")

    lattice_edges = mask.lattice.edges
    previous = -1
    for _ in range(difficulty):
        if edges.size > 1 and previous >= 0:
            choice = int(rng.integers(edges.size - 1))
            edge = int(edges[choice])
            if edge == previous:
                edge = int(edges[-1])
        else:
            edge = int(edges[int(rng.integers(edges.size))])
        perm = apply_swap(perm, lattice_edges[edge])
        previous = edge
    return perm


@dataclass(frozen=True)
class EpisodeState:
    """Isolated value describing one synthesis episode."""

    perm: Permutation
    mask: TopologyMask
    steps_taken: int
    max_steps: int
    done: bool
    solved: bool


@dataclass(frozen=True)
class StepResult:
    """Transition produced by ``step``."""

    state: EpisodeState
    reward: float
    done: bool


def reset(perm: Permutation, mask: TopologyMask, max_steps: int) -> EpisodeState:
    """Start an episode; an identity input is already solved at step 0."""
    if max_steps < 0:
        raise InvalidArgumentError("max_steps must be >= 0")
    solved = is_identity(perm)
    return EpisodeState(
        perm=np.asarray(perm, dtype=np.int64),
        mask=mask,
        steps_taken=0,
        max_steps=max_steps,
        done=solved or max_steps == 0,
        solved=solved,
    )


def step(state: EpisodeState, action: int, cfg: RewardConfig) -> StepResult:
    """
    Apply the swap on edge ``action``.

    Raises:
        ContractViolationError: the episode is over or the edge is inactive
    """
    if state.done:
        raise ContractViolationError("step called on a finished episode")
    if not state.mask.is_active_edge(action):
        raise ContractViolationError(f"edge {action} is not active under the episode mask")

    perm = apply_swap(state.perm, state.mask.lattice.edges[action])
    steps_taken = state.steps_taken + 1
    solved = is_identity(perm)
    reward = cfg.step_penalty + (cfg.success_reward if solved else 0.0)
    done = solved or steps_taken >= state.max_steps
    new_state = replace(state, perm=perm, steps_taken=steps_taken, done=done, solved=solved)
    return StepResult(state=new_state, reward=reward, done=done)


def episode_return(gates: int, cfg: RewardConfig, solved: bool = True) -> float:
    """Undiscounted return of an episode that used ``gates`` swaps."""
    return gates * cfg.step_penalty + (cfg.success_reward if solved else 0.0)


def curriculum_update(cur: CurriculumState, batch_success_rate: float) -> CurriculumState:
    """
    Raise the difficulty by one when the batch success rate beats the threshold.

    Raises:
        InvalidArgumentError: rate outside [0, 1]
    """
    if not 0.0 <= batch_success_rate <= 1.0:
        raise InvalidArgumentError(f"success rate must be in [0, 1], got {batch_success_rate}")
    difficulty = cur.difficulty
    if batch_success_rate > cur.success_threshold:
        difficulty += 1
        logger.info(
            "Curriculum difficulty increased",
            difficulty=difficulty,
            success_rate=round(batch_success_rate, 4),
        )
    return cur.model_copy(
        update={"difficulty": difficulty, "window_success_rate": batch_success_rate}
    )
