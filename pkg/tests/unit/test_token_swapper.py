"""Tests for the randomized approximate token swapper."""

import numpy as np
import pytest

from permsynth.core.exceptions import InvalidArgumentError
from permsynth.domain.services.environment import identity_permutation
from permsynth.domain.services.swap_oracle import bfs_optimal
from permsynth.domain.services.synthesizer import verify
from permsynth.domain.services.token_swapper import token_swap
from permsynth.domain.services.topology import build_lattice, sample_connected_mask


def _random_instance(mask, rng):
    perm = np.arange(mask.lattice.num_nodes)
    active = mask.active_node_ids
    perm[active] = rng.permutation(active)
    return perm


class TestTokenSwap:
    """Tests for token_swap."""

    @pytest.mark.parametrize("n,optimal", [(3, 3), (4, 6), (5, 10)])
    def test_path_reversal_is_optimal(self, path_of, n, optimal):
        """Test that reversing a path costs n(n-1)/2 swaps, the known optimum."""
        mask = path_of(n)
        reversal = np.arange(n)[::-1].copy()
        circuit = token_swap(reversal, mask, trials=1000, rng=np.random.default_rng(0))
        assert verify(circuit)
        assert circuit.gate_count == optimal

    def test_identity(self, ring_3x3, rng):
        """Test that identity needs no swaps."""
        circuit = token_swap(identity_permutation(9), ring_3x3, trials=5, rng=rng)
        assert circuit.gate_count == 0

    def test_random_instances_verify_within_bound(self, lattice_3x3):
        """Test correctness and a 4x approximation bound against the exact optimum."""
        rng = np.random.default_rng(2024)
        for _ in range(20):
            mask = sample_connected_mask(lattice_3x3, (2, 8), rng)
            perm = _random_instance(mask, rng)
            circuit = token_swap(perm, mask, trials=20, rng=rng)
            assert verify(circuit)
            assert np.array_equal(circuit.source_permutation, perm)
            assert circuit.gate_count <= 4 * bfs_optimal(perm, mask).swaps

    def test_more_trials_never_worse(self):
        """Test that trials drawn from the same stream form a prefix."""
        lattice = build_lattice(4, 4)
        mask = sample_connected_mask(lattice, (12, 12), np.random.default_rng(8))
        perm = _random_instance(mask, np.random.default_rng(9))
        few = token_swap(perm, mask, trials=3, rng=np.random.default_rng(42))
        many = token_swap(perm, mask, trials=30, rng=np.random.default_rng(42))
        assert (many.gate_count, many.depth) <= (few.gate_count, few.depth)

    def test_deterministic_under_seed(self, full_3x3):
        """Test that equal seeds give equal circuits."""
        perm = np.random.default_rng(5).permutation(9)
        a = token_swap(perm, full_3x3, trials=10, rng=np.random.default_rng(1))
        b = token_swap(perm, full_3x3, trials=10, rng=np.random.default_rng(1))
        assert a.gates == b.gates

    def test_trials_must_be_positive(self, full_2x2):
        """Test argument validation."""
        with pytest.raises(InvalidArgumentError):
            token_swap(identity_permutation(4), full_2x2, trials=0)

    def test_rejects_moving_inactive_node(self, path_3x3):
        """Test that inactive nodes must stay fixed."""
        perm = identity_permutation(9)
        perm[[2, 5]] = [5, 2]
        with pytest.raises(InvalidArgumentError):
            token_swap(perm, path_3x3)
