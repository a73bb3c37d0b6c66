"""Tests for inference-time synthesis and circuit verification."""

import numpy as np
import pytest

from permsynth.core.exceptions import InvalidArgumentError
from permsynth.domain.entities.circuit import SwapCircuit, circuit_depth
from permsynth.domain.entities.training import InferenceMode, RewardConfig
from permsynth.domain.services import synthesizer
from permsynth.domain.services.environment import identity_permutation, reset, step
from permsynth.domain.services.policy_network import PolicyNet, act
from permsynth.domain.services.synthesizer import (
    default_step_cap,
    implemented_permutation,
    synthesize,
    verify,
)
from permsynth.domain.services.topology import build_lattice, sample_connected_mask


@pytest.fixture
def net_1x3(path_of) -> PolicyNet:
    return PolicyNet.initialize(path_of(3).lattice, (8, 8, 8), seed=0)


class TestCircuitDepth:
    """Tests for ASAP layering."""

    def test_disjoint_gates_share_a_layer(self):
        """Test that gates on distinct qubits run in parallel."""
        assert circuit_depth([(0, 1), (2, 3)]) == 1

    def test_chain(self):
        """Test that gates sharing a qubit are sequential."""
        assert circuit_depth([(0, 1), (1, 2), (2, 3)]) == 3

    def test_empty(self):
        """Test that the empty circuit has depth 0."""
        assert circuit_depth([]) == 0

    def test_later_gate_fills_earlier_layer(self):
        """Test that a gate only waits for its own qubits."""
        assert circuit_depth([(0, 1), (1, 2), (3, 4)]) == 2


class TestCircuitOrientation:
    """Tests for the action-to-circuit reversal."""

    def test_from_actions_reverses(self, path_of):
        """Test that actions [e0, e1] become gates [e1, e0]."""
        mask = path_of(3)
        circuit = SwapCircuit.from_actions([0, 1], np.array([1, 2, 0]), mask)
        assert circuit.gates == ((1, 2), (0, 1))

    def test_implemented_permutation_is_the_source(self, path_of):
        """Test that running the gates on identity wiring reproduces the target."""
        mask = path_of(3)
        circuit = SwapCircuit.from_actions([0, 1], np.array([1, 2, 0]), mask)
        assert implemented_permutation(circuit).tolist() == [1, 2, 0]
        assert verify(circuit)


class TestVerify:
    """Tests for circuit verification."""

    def test_wrong_permutation(self, path_of):
        """Test that a circuit implementing another permutation fails."""
        circuit = SwapCircuit(gates=((0, 1),), source=(1, 2, 0), mask=path_of(3))
        assert not verify(circuit)

    def test_inactive_edge(self, ring_3x3):
        """Test that a gate on an inactive edge fails even if the permutation matches."""
        source = identity_permutation(9)
        source[[1, 4]] = [4, 1]
        circuit = SwapCircuit(gates=((1, 4),), source=tuple(source), mask=ring_3x3)
        assert not verify(circuit)

    def test_non_lattice_pair(self, full_3x3):
        """Test that a gate between non-adjacent nodes fails."""
        source = identity_permutation(9)
        source[[0, 4]] = [4, 0]
        circuit = SwapCircuit(gates=((0, 4),), source=tuple(source), mask=full_3x3)
        assert not verify(circuit)

    def test_empty_circuit_for_identity(self, full_2x2):
        """Test that the empty circuit implements the identity."""
        assert verify(SwapCircuit(gates=(), source=(0, 1, 2, 3), mask=full_2x2))


class TestSynthesize:
    """Tests for the synthesize operation."""

    def test_scripted_policy_orientation(self, net_1x3, path_of, mocker):
        """Test the returned circuit for a scripted action sequence."""
        mocker.patch.object(synthesizer, "greedy_action", side_effect=[0, 1])
        result = synthesize(net_1x3, np.array([1, 2, 0]), path_of(3), InferenceMode.GREEDY)
        assert result.circuit is not None
        assert result.circuit.gates == ((1, 2), (0, 1))
        assert result.successful_attempts == 1

    def test_identity_gives_empty_circuit(self, tiny_net_2x2, full_2x2, rng):
        """Test that identity needs no gates."""
        result = synthesize(tiny_net_2x2, identity_permutation(4), full_2x2, rng=rng)
        assert result.circuit is not None
        assert result.circuit.gate_count == 0
        assert result.circuit.depth == 0

    def test_step_cap_failure(self, net_1x3, path_of, rng):
        """Test that a cap below the minimum swap count is a failure value."""
        result = synthesize(net_1x3, np.array([1, 2, 0]), path_of(3), attempts=4, step_cap=1, rng=rng)
        assert result.circuit is None
        assert not result.succeeded
        assert result.attempts_used == 4
        assert result.successful_attempts == 0

    def test_greedy_forces_single_attempt(self, tiny_net_2x2, full_2x2, mocker):
        """Test that greedy mode logs a warning and runs once."""
        warning = mocker.patch.object(synthesizer.logger, "warning")
        result = synthesize(
            tiny_net_2x2, np.array([1, 0, 2, 3]), full_2x2, InferenceMode.GREEDY, attempts=5
        )
        assert result.attempts_used == 1
        warning.assert_called_once()

    def test_more_attempts_never_worse(self, tiny_net_3x3, full_3x3):
        """Test the prefix property: the same stream with more attempts is at least as good."""
        for seed in range(5):
            perm = np.random.default_rng(100 + seed).permutation(9)
            few = synthesize(tiny_net_3x3, perm, full_3x3, attempts=3, rng=np.random.default_rng(seed))
            many = synthesize(tiny_net_3x3, perm, full_3x3, attempts=10, rng=np.random.default_rng(seed))
            if few.circuit is not None:
                assert many.circuit is not None
                assert (many.circuit.gate_count, many.circuit.depth) <= (
                    few.circuit.gate_count,
                    few.circuit.depth,
                )

    def test_results_always_verify(self, tiny_net_3x3):
        """Test that every returned circuit verifies on random masks and instances."""
        rng = np.random.default_rng(77)
        lattice = build_lattice(3, 3)
        for _ in range(30):
            mask = sample_connected_mask(lattice, (2, 9), rng)
            perm = np.arange(9)
            active = mask.active_node_ids
            perm[active] = rng.permutation(active)
            result = synthesize(tiny_net_3x3, perm, mask, attempts=3, rng=rng)
            if result.circuit is not None:
                assert verify(result.circuit)
                assert np.array_equal(result.circuit.source_permutation, perm)

    def test_lattice_mismatch(self, tiny_net_2x2, full_3x3):
        """Test that the net must match the topology lattice."""
        with pytest.raises(InvalidArgumentError):
            synthesize(tiny_net_2x2, identity_permutation(9), full_3x3)

    def test_invalid_permutation(self, tiny_net_3x3, ring_3x3):
        """Test that moving an inactive node is rejected."""
        perm = identity_permutation(9)
        perm[[3, 4]] = [4, 3]
        with pytest.raises(InvalidArgumentError):
            synthesize(tiny_net_3x3, perm, ring_3x3)

    def test_attempts_must_be_positive(self, tiny_net_2x2, full_2x2):
        """Test argument validation."""
        with pytest.raises(InvalidArgumentError):
            synthesize(tiny_net_2x2, identity_permutation(4), full_2x2, attempts=0)

    def test_default_step_cap(self, ring_3x3):
        """Test the 3 k^2 default."""
        assert default_step_cap(ring_3x3) == 3 * 64

    def test_attempts_share_one_forward_pass_per_step(self, tiny_net_3x3, full_3x3, mocker):
        """Test that all live attempts are evaluated in a single batched forward pass."""
        forward = mocker.spy(tiny_net_3x3, "forward")
        perm = np.random.default_rng(3).permutation(9)
        result = synthesize(tiny_net_3x3, perm, full_3x3, attempts=10, rng=np.random.default_rng(0))

        first_batch = forward.call_args_list[0].args[0]
        assert first_batch.shape[0] == 10
        assert forward.call_count <= default_step_cap(full_3x3)
        assert result.attempts_used == 10

    def test_matches_one_attempt_at_a_time(self, tiny_net_3x3, full_3x3):
        """Test that lock-step attempts pick the same circuit as sequential single-state rollouts."""
        rewards = RewardConfig()
        cap = default_step_cap(full_3x3)
        for seed in range(3):
            perm = np.random.default_rng(50 + seed).permutation(9)
            result = synthesize(tiny_net_3x3, perm, full_3x3, attempts=4, rng=np.random.default_rng(seed))

            best = None
            seeds = np.random.default_rng(seed).integers(0, 2**63 - 1, size=4)
            for attempt, attempt_seed in enumerate(seeds):
                stream = np.random.default_rng(int(attempt_seed))
                state = reset(perm, full_3x3, cap)
                actions = []
                while not state.done:
                    action = act(tiny_net_3x3, state.perm, full_3x3, InferenceMode.SAMPLING, stream)
                    actions.append(action)
                    state = step(state, action, rewards).state
                if not state.solved:
                    continue
                circuit = SwapCircuit.from_actions(actions, perm, full_3x3)
                key = (circuit.gate_count, circuit.depth, attempt)
                if best is None or key < best[0]:
                    best = (key, circuit)

            if best is None:
                assert result.circuit is None
            else:
                assert result.circuit is not None
                assert result.circuit.gates == best[1].gates
