"""Inference-time circuit synthesis: roll out the policy, reverse the actions, verify."""

import time
from typing import Optional

import numpy as np

from permsynth.core.exceptions import InvalidArgumentError
from permsynth.core.logging import get_logger
from permsynth.domain.entities.circuit import (
    Permutation,
    SwapCircuit,
    SynthesisResult,
    circuit_depth,
)
from permsynth.domain.entities.lattice import TopologyMask
from permsynth.domain.entities.training import InferenceMode, RewardConfig
from permsynth.domain.services.environment import (
    apply_swap,
    identity_permutation,
    reset,
    step,
    validate_permutation,
)
from permsynth.domain.services.policy_network import (
    PolicyNet,
    encode_batch,
    greedy_action,
    masked_log_softmax,
    sample_action,
)

logger = get_logger(__name__)

__all__ = [
    "circuit_depth",
    "default_step_cap",
    "implemented_permutation",
    "synthesize",
    "verify",
]

_REWARDS = RewardConfig()


def default_step_cap(mask: TopologyMask) -> int:
    """3 * k^2 for k active nodes."""
    return 3 * mask.num_active_nodes**2


def _rollouts(
    net: PolicyNet,
    perm: Permutation,
    mask: TopologyMask,
    mode: InferenceMode,
    step_cap: int,
    streams: list[np.random.Generator],
) -> list[Optional[list[int]]]:
    """
    Roll out one attempt per stream in lock-step, one batched forward pass per step.

    Returns:
        Per attempt, the actions that drove ``perm`` to identity, or None when
        that attempt hit the cap
    """
    states = [reset(perm, mask, step_cap) for _ in streams]
    actions: list[list[int]] = [[] for _ in streams]
    live = [i for i, s in enumerate(states) if not s.done]
    while live:
        edge_masks = np.broadcast_to(mask.edge_mask, (len(live), mask.edge_mask.size))
        obs = encode_batch(
            np.stack([states[i].perm for i in live]),
            np.broadcast_to(mask.node_mask, (len(live), mask.node_mask.size)),
            edge_masks,
        )
        logits, _ = net.forward(obs)
        _, probs = masked_log_softmax(logits, edge_masks)
        for row, i in enumerate(live):
            if mode is InferenceMode.GREEDY:
                action = greedy_action(logits[row], mask.edge_mask)
            else:
                action = sample_action(probs[row], streams[i])
            actions[i].append(action)
            states[i] = step(states[i], action, _REWARDS).state
        live = [i for i in live if not states[i].done]
    return [taken if state.solved else None for taken, state in zip(actions, states)]


def synthesize(
    net: PolicyNet,
    perm: Permutation,
    mask: TopologyMask,
    mode: InferenceMode = InferenceMode.SAMPLING,
    attempts: int = 10,
    step_cap: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> SynthesisResult:
    """
    Synthesize a SWAP circuit for ``perm`` on ``mask``.

    Attempts step together through one batched forward pass per step;
    attempt i samples from the i-th seed drawn from ``rng``, so a longer run
    replays a shorter one as its prefix. The best successful attempt wins by
    (gates, depth, attempt index). Greedy rollouts are deterministic, so greedy
    mode makes a single attempt.

    Returns:
        SynthesisResult whose circuit is None when every attempt hit the cap

    Raises:
        InvalidArgumentError: lattice mismatch, invalid permutation or attempts < 1
    """
    if not net.matches(mask.lattice):
        raise InvalidArgumentError(
            f"network is for a {net.lattice.rows}x{net.lattice.cols} lattice, "
            f"topology is {mask.lattice.rows}x{mask.lattice.cols}"
        )
    if attempts < 1:
        raise InvalidArgumentError(f"attempts must be >= 1, got {attempts}")
    perm = validate_permutation(perm, mask)
    if mode is InferenceMode.GREEDY and attempts > 1:
        logger.warning("Greedy mode forces a single attempt", requested_attempts=attempts)
        attempts = 1
    if step_cap is None:
        step_cap = default_step_cap(mask)
    if rng is None:
        rng = np.random.default_rng()

    started = time.perf_counter_ns()
    best: Optional[tuple[int, int, int]] = None
    best_circuit: Optional[SwapCircuit] = None
    successes = 0
    streams = [np.random.default_rng(int(seed)) for seed in rng.integers(0, 2**63 - 1, size=attempts)]
    for attempt, actions in enumerate(_rollouts(net, perm, mask, mode, step_cap, streams)):
        if actions is None:
            continue
        successes += 1
        circuit = SwapCircuit.from_actions(actions, perm, mask)
        key = (circuit.gate_count, circuit.depth, attempt)
        if best is None or key < best:
            best, best_circuit = key, circuit
    elapsed = time.perf_counter_ns() - started

    if best_circuit is None:
        logger.info("Synthesis failed", attempts=attempts, step_cap=step_cap)
    else:
        logger.debug(
            "Synthesis finished",
            gates=best_circuit.gate_count,
            depth=best_circuit.depth,
            successful_attempts=successes,
            attempts=attempts,
        )
    return SynthesisResult(
        circuit=best_circuit,
        attempts_used=attempts,
        successful_attempts=successes,
        wall_time_ns=elapsed,
    )


def implemented_permutation(circuit: SwapCircuit) -> Permutation:
    """Permutation produced by running the gates in execution order on identity wiring."""
    perm = identity_permutation(circuit.mask.lattice.num_nodes)
    for gate in circuit.gates:
        perm = apply_swap(perm, gate)
    return perm


def verify(circuit: SwapCircuit) -> bool:
    """
    Whether the circuit implements its source permutation using active edges only.

    Equivalently, undoing the gates (reverse order) on the source reaches identity.
    """
    lattice = circuit.mask.lattice
    for a, b in circuit.gates:
        try:
            edge = lattice.edge_index(a, b)
        except InvalidArgumentError:
            return False
        if not circuit.mask.is_active_edge(edge):
            return False
    return bool(np.array_equal(implemented_permutation(circuit), circuit.source_permutation))
