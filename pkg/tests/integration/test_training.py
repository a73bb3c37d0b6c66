"""Desk-scale learning runs. Deselected by default; run with ``pytest -m slow``."""

import time
from itertools import permutations

import numpy as np
import pytest

from permsynth.domain.entities.lattice import TopologyMask
from permsynth.domain.entities.training import TopologyRegime, TrainConfig
from permsynth.domain.services.benchmark_service import random_instance
from permsynth.domain.services.environment import is_identity
from permsynth.domain.services.policy_network import PolicyNet
from permsynth.domain.services.ppo_trainer import TrainingResult, fine_tune, train
from permsynth.domain.services.swap_oracle import bfs_optimal
from permsynth.domain.services.synthesizer import synthesize, verify
from permsynth.domain.services.token_swapper import token_swap
from permsynth.domain.services.topology import build_lattice, full_mask, resolve_topology

SEEDS = (0, 1, 2)


@pytest.fixture(scope="module")
def trained_2x2():
    """Default-config 2x2 runs of 200 iterations, trained once per seed."""
    runs: dict[int, TrainingResult] = {}

    def get(seed: int) -> TrainingResult:
        if seed not in runs:
            runs[seed] = train(TrainConfig(rows=2, cols=2, max_iterations=200, seed=seed))
        return runs[seed]

    return get


@pytest.fixture(scope="module")
def trained_3x3():
    """Default-config 3x3 runs of 2000 iterations, trained once per seed."""
    runs: dict[int, TrainingResult] = {}

    def get(seed: int) -> TrainingResult:
        if seed not in runs:
            runs[seed] = train(TrainConfig(rows=3, cols=3, max_iterations=2000, seed=seed))
        return runs[seed]

    return get


def _instances(mask: TopologyMask, count: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [random_instance(mask, rng) for _ in range(count)]


def _excess_fraction(net: PolicyNet, mask: TopologyMask, instances, optimal: list[int]) -> float:
    """Share of instances failed or solved with more than 1.05x the optimal swap count."""
    excess = 0
    for index, (perm, best) in enumerate(zip(instances, optimal)):
        result = synthesize(net, perm, mask, attempts=10, rng=np.random.default_rng(index))
        if result.circuit is None or result.circuit.gate_count > 1.05 * best:
            excess += 1
    return excess / len(instances)


@pytest.mark.slow
class TestLearning:
    """The trained policy should solve small lattices near-optimally."""

    def test_2x2_generic_model(self, trained_2x2):
        """Test that 200 iterations reach difficulty 6 and sampling matches the optimum on 95% of 2x2 permutations."""
        mask = full_mask(build_lattice(2, 2))
        difficulties = []
        for seed in SEEDS:
            result = trained_2x2(seed)
            difficulties.append(result.curriculum.difficulty)

            rng = np.random.default_rng(seed)
            matched = 0
            for perm in permutations(range(4)):
                perm = np.array(perm)
                outcome = synthesize(result.net, perm, mask, attempts=10, rng=rng)
                if outcome.circuit is None:
                    continue
                assert verify(outcome.circuit)
                matched += outcome.circuit.gate_count == bfs_optimal(perm, mask).swaps
            assert matched >= 0.95 * 24
        assert np.mean(difficulties) >= 6

    def test_3x3_generic_model(self, trained_3x3):
        """Test that 2000 iterations reach difficulty 9 with 95% success and median overhead 1.15 on the full 3x3."""
        mask = full_mask(build_lattice(3, 3))
        difficulties = []
        for seed in SEEDS:
            result = trained_3x3(seed)
            difficulties.append(result.curriculum.difficulty)

            rng = np.random.default_rng(seed)
            solved = 0
            ratios = []
            instances = _instances(mask, 200, 1000 + seed)
            for perm in instances:
                outcome = synthesize(result.net, perm, mask, attempts=10, rng=rng)
                if outcome.circuit is None:
                    continue
                solved += 1
                if not is_identity(perm):
                    ratios.append(outcome.circuit.gate_count / bfs_optimal(perm, mask).swaps)
            assert solved >= 0.95 * len(instances)
            assert np.median(ratios) <= 1.15
        assert np.mean(difficulties) >= 9

    def test_3x3_depth_against_token_swapping(self, trained_3x3):
        """Test that the generic model's mean depth and gates stay close to best-of-1000 token swapping."""
        net = trained_3x3(0).net
        mask = full_mask(build_lattice(3, 3))
        rng = np.random.default_rng(8)
        generic_depth, generic_gates, swap_depth, swap_gates = [], [], [], []
        failures = 0
        for perm in _instances(mask, 500, 2000):
            outcome = synthesize(net, perm, mask, attempts=10, rng=rng)
            if outcome.circuit is None:
                failures += 1
                continue
            baseline = token_swap(perm, mask, trials=1000, rng=rng)
            generic_depth.append(outcome.circuit.depth)
            generic_gates.append(outcome.circuit.gate_count)
            swap_depth.append(baseline.depth)
            swap_gates.append(baseline.gate_count)

        assert failures <= 0.05 * 500
        assert np.mean(generic_depth) <= 1.05 * np.mean(swap_depth)
        assert np.mean(generic_gates) <= 1.10 * np.mean(swap_gates)

    def test_fine_tuning_on_ring_reduces_excess_gates(self, trained_3x3):
        """Test that forcing the 8-node ring lowers the share of ring instances above 1.05x optimal."""
        base = trained_3x3(0)
        lattice = build_lattice(3, 3)
        ring = resolve_topology("8qO", lattice)
        instances = _instances(ring, 300, 3000)
        optimal = [bfs_optimal(perm, ring).swaps for perm in instances]

        cfg = TrainConfig(
            rows=3,
            cols=3,
            topology_regime=TopologyRegime.FORCED_MIX,
            forced_topologies=("8qO",),
            force_prob=0.25,
            initial_difficulty=base.curriculum.difficulty,
            max_iterations=500,
            seed=1,
        )
        tuned = fine_tune(base.net, cfg).net

        before = _excess_fraction(base.net, ring, instances, optimal)
        after = _excess_fraction(tuned, ring, instances, optimal)
        assert after < before

    def test_fine_tuning_on_4_ring_keeps_success_rate(self, trained_2x2):
        """Test that fine-tuning a 2x2 model on its 4-node ring does not lower the ring success rate."""
        base = trained_2x2(0)
        ring = full_mask(build_lattice(2, 2))
        cfg = TrainConfig(
            rows=2,
            cols=2,
            topology_regime=TopologyRegime.FIXED,
            fixed_topology="full",
            initial_difficulty=base.curriculum.difficulty,
            max_iterations=50,
            seed=1,
        )
        tuned = fine_tune(base.net, cfg).net

        def success_rate(net: PolicyNet) -> float:
            solved = 0
            for index, perm in enumerate(_instances(ring, 500, 4000)):
                result = synthesize(net, perm, ring, attempts=1, rng=np.random.default_rng(index))
                solved += result.succeeded
            return solved / 500

        assert success_rate(tuned) >= success_rate(base.net)

    def test_synthesis_faster_than_token_swapping(self, trained_3x3):
        """Test that 10-attempt synthesis takes at most a third of 1000-trial token swapping."""
        net = trained_3x3(0).net
        mask = full_mask(build_lattice(3, 3))
        rng = np.random.default_rng(13)
        synth_ns, swap_ns = [], []
        for perm in _instances(mask, 30, 5000):
            synth_ns.append(synthesize(net, perm, mask, attempts=10, rng=rng).wall_time_ns)
            started = time.perf_counter_ns()
            token_swap(perm, mask, trials=1000, rng=rng)
            swap_ns.append(time.perf_counter_ns() - started)
        assert np.median(synth_ns) <= np.median(swap_ns) / 3
