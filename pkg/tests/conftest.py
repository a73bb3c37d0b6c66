"""Pytest configuration and fixtures."""

from pathlib import Path

import numpy as np
import pytest

from permsynth.core.config import PROJECT_ROOT
from permsynth.domain.entities.lattice import Lattice, TopologyMask
from permsynth.domain.entities.training import TrainConfig
from permsynth.domain.services.policy_network import PolicyNet
from permsynth.domain.services.topology import build_lattice, full_mask, mask_from_nodes

PRESETS_FILE = PROJECT_ROOT / "config" / "topologies.yaml"


# =============================================================================
# Lattice Fixtures
# =============================================================================


@pytest.fixture
def lattice_2x2() -> Lattice:
    return build_lattice(2, 2)


@pytest.fixture
def lattice_3x3() -> Lattice:
    return build_lattice(3, 3)


@pytest.fixture
def full_2x2(lattice_2x2: Lattice) -> TopologyMask:
    return full_mask(lattice_2x2)


@pytest.fixture
def full_3x3(lattice_3x3: Lattice) -> TopologyMask:
    return full_mask(lattice_3x3)


@pytest.fixture
def ring_3x3(lattice_3x3: Lattice) -> TopologyMask:
    """Perimeter of the 3x3 lattice: 8 nodes, 8 edges, centre inactive."""
    return mask_from_nodes(lattice_3x3, [0, 1, 2, 3, 5, 6, 7, 8])


@pytest.fixture
def path_3x3(lattice_3x3: Lattice) -> TopologyMask:
    """Top row of the 3x3 lattice as a 3-node path."""
    return mask_from_nodes(lattice_3x3, [0, 1, 2])


@pytest.fixture
def path_of():
    """Factory: the full 1 x n lattice, i.e. an n-node path."""

    def make(n: int) -> TopologyMask:
        return full_mask(build_lattice(1, n))

    return make


# =============================================================================
# Network / Config Fixtures
# =============================================================================


@pytest.fixture
def tiny_net_2x2(lattice_2x2: Lattice) -> PolicyNet:
    return PolicyNet.initialize(lattice_2x2, hidden_sizes=(16, 16, 16), seed=3)


@pytest.fixture
def tiny_net_3x3(lattice_3x3: Lattice) -> PolicyNet:
    return PolicyNet.initialize(lattice_3x3, hidden_sizes=(16, 16, 16), seed=5)


@pytest.fixture
def tiny_train_config() -> TrainConfig:
    """A training config small enough for unit tests (seconds, not minutes)."""
    return TrainConfig(
        rows=2,
        cols=2,
        hidden_sizes=(16, 16, 16),
        batch_episodes=8,
        ppo_epochs=2,
        minibatch_size=16,
        max_iterations=3,
        checkpoint_every=2,
        seed=11,
    )


@pytest.fixture
def presets_file() -> Path:
    return PRESETS_FILE


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
