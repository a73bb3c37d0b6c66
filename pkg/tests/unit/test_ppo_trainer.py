"""Tests for GAE, the PPO objective and the training loop."""

from itertools import permutations

import numpy as np
import pytest

from permsynth.core.exceptions import InvalidArgumentError, NonFiniteLossError
from permsynth.domain.entities.circuit import SwapCircuit
from permsynth.domain.entities.training import InferenceMode, TopologyRegime, TrainConfig
from permsynth.domain.services.environment import validate_permutation
from permsynth.domain.services.policy_network import (
    PolicyNet,
    encode,
    masked_log_softmax,
)
from permsynth.domain.services.ppo_trainer import (
    AdamOptimizer,
    EpisodeRecord,
    PPOTrainer,
    Rollout,
    TopologySampler,
    build_rollout,
    clip_grad_norm,
    compute_gae,
    fine_tune,
    ppo_loss_and_grads,
    ppo_update,
)
from permsynth.domain.services.swap_oracle import bfs_optimal
from permsynth.domain.services.synthesizer import synthesize, verify
from permsynth.domain.services.topology import build_lattice, full_mask, mask_from_nodes
from permsynth.infrastructure.files.model_container import MODEL_EXTENSION, encode_model
from permsynth.infrastructure.files.training_log import read_training_log


def gae_by_definition(rewards, values, gamma, lam, bootstrap=0.0):
    """Quadratic-time GAE straight from the sum of discounted TD errors."""
    steps = len(rewards)
    padded = list(values) + [bootstrap]
    deltas = [rewards[t] + gamma * padded[t + 1] - padded[t] for t in range(steps)]
    return np.array(
        [sum((gamma * lam) ** k * deltas[t + k] for k in range(steps - t)) for t in range(steps)]
    )


class TestComputeGae:
    """Tests for advantage estimation."""

    def test_matches_definition(self, rng):
        """Test the backward recursion against the direct sum on random episodes."""
        for _ in range(100):
            steps = int(rng.integers(1, 40))
            rewards = rng.normal(size=steps)
            values = rng.normal(size=steps)
            gamma, lam = rng.uniform(0.8, 1.0), rng.uniform(0.5, 1.0)
            bootstrap = float(rng.normal()) if rng.random() < 0.5 else 0.0
            adv, ret = compute_gae(rewards, values, gamma, lam, bootstrap)
            expected = gae_by_definition(rewards, values, gamma, lam, bootstrap)
            np.testing.assert_allclose(adv, expected, rtol=0, atol=1e-10)
            np.testing.assert_allclose(ret, expected + values, rtol=0, atol=1e-10)

    def test_lambda_one_gives_discounted_returns(self):
        """Test that lambda = 1 returns the Monte-Carlo discounted return."""
        rewards = np.array([-0.1, -0.1, 9.9])
        _, ret = compute_gae(rewards, np.array([1.0, 2.0, 3.0]), 0.9, 1.0)
        assert ret[0] == pytest.approx(-0.1 - 0.09 + 0.81 * 9.9)


class TestBuildRollout:
    """Tests for batch flattening."""

    def test_skips_empty_episodes(self, full_2x2, lattice_2x2):
        """Test that identity episodes contribute no transitions."""
        cfg = TrainConfig(rows=2, cols=2)
        obs = encode(np.array([1, 0, 2, 3]), full_2x2)
        played = EpisodeRecord(
            mask=full_2x2,
            source=np.array([1, 0, 2, 3]),
            observations=[obs],
            actions=[0],
            log_probs=[-1.0],
            values=[0.5],
            rewards=[9.9],
            solved=True,
        )
        empty = EpisodeRecord(mask=full_2x2, source=np.arange(4), solved=True)
        rollout = build_rollout([empty, played, empty], cfg, lattice_2x2)
        assert rollout.size == 1
        assert rollout.edge_masks.shape == (1, 4)
        assert rollout.returns[0] == pytest.approx(9.9)

    def test_all_empty(self, full_2x2, lattice_2x2):
        """Test the shape of an empty rollout."""
        cfg = TrainConfig(rows=2, cols=2)
        rollout = build_rollout([EpisodeRecord(mask=full_2x2, source=np.arange(4))], cfg, lattice_2x2)
        assert rollout.size == 0
        assert rollout.observations.shape == (0, 24)

    def test_bootstrap_only_for_truncated(self, full_2x2, lattice_2x2):
        """Test that the final value is used only for unsolved episodes when enabled."""
        obs = encode(np.array([1, 0, 2, 3]), full_2x2)
        cut = EpisodeRecord(
            mask=full_2x2,
            source=np.array([1, 0, 2, 3]),
            observations=[obs],
            actions=[1],
            log_probs=[-1.0],
            values=[0.0],
            rewards=[-0.1],
            solved=False,
            final_value=5.0,
        )
        off = build_rollout([cut], TrainConfig(rows=2, cols=2), lattice_2x2)
        on = build_rollout([cut], TrainConfig(rows=2, cols=2, bootstrap_truncated=True), lattice_2x2)
        assert off.returns[0] == pytest.approx(-0.1)
        assert on.returns[0] == pytest.approx(-0.1 + 0.99 * 5.0)


def _gradient_check_batch(net: PolicyNet, rng: np.random.Generator) -> Rollout:
    """Eight transitions over a full and a partial 2x2 mask."""
    lattice = net.lattice
    masks = [full_mask(lattice), mask_from_nodes(lattice, [0, 1, 3])]
    observations, actions, edge_masks = [], [], []
    for i in range(8):
        mask = masks[i % 2]
        perm = np.arange(4)
        active = mask.active_node_ids
        perm[active] = rng.permutation(active)
        observations.append(encode(perm, mask))
        actions.append(int(rng.choice(mask.active_edge_ids)))
        edge_masks.append(mask.edge_mask)
    obs = np.stack(observations).astype(np.float64)
    edge_masks = np.stack(edge_masks)
    actions = np.array(actions)
    logits, _ = net.forward(obs)
    log_probs, _ = masked_log_softmax(logits, edge_masks)
    current = log_probs[np.arange(8), actions]
    return Rollout(
        observations=obs,
        actions=actions,
        old_log_probs=current + rng.uniform(-0.5, 0.5, size=8),
        values=rng.normal(size=8),
        advantages=rng.normal(size=8),
        returns=rng.normal(size=8),
        edge_masks=edge_masks,
    )


class TestPPOObjective:
    """Tests for the clipped loss and its gradients."""

    def test_gradients_match_finite_differences(self, lattice_2x2):
        """Test analytic PPO gradients on a small float64 net (< 1000 parameters)."""
        rng = np.random.default_rng(21)
        net = PolicyNet.initialize(lattice_2x2, (6, 6, 6), seed=8, dtype=np.float64)
        for p in net.params:
            p += rng.normal(scale=0.2, size=p.shape)
        assert net.parameter_count <= 1000
        batch = _gradient_check_batch(net, rng)
        cfg = TrainConfig(rows=2, cols=2, hidden_sizes=(6, 6, 6), entropy_coef=0.05)

        _, grads, _ = ppo_loss_and_grads(net, batch, cfg)

        h = 1e-6
        for param, grad in zip(net.params, grads):
            numeric = np.zeros_like(param)
            for idx in np.ndindex(param.shape):
                saved = param[idx]
                param[idx] = saved + h
                up = ppo_loss_and_grads(net, batch, cfg)[0]
                param[idx] = saved - h
                down = ppo_loss_and_grads(net, batch, cfg)[0]
                param[idx] = saved
                numeric[idx] = (up - down) / (2 * h)
            scale = max(float(np.max(np.abs(numeric))), 1e-6)
            assert float(np.max(np.abs(grad - numeric))) <= 1e-3 * scale

    def test_non_finite_loss(self, lattice_2x2):
        """Test that a NaN loss raises with diagnostics."""
        rng = np.random.default_rng(3)
        net = PolicyNet.initialize(lattice_2x2, (6, 6, 6), seed=8, dtype=np.float64)
        batch = _gradient_check_batch(net, rng)
        batch.returns[0] = np.nan
        with pytest.raises(NonFiniteLossError) as exc:
            ppo_loss_and_grads(net, batch, TrainConfig(rows=2, cols=2))
        assert "value_loss" in exc.value.diagnostics

    def test_update_rejects_empty_rollout(self, tiny_net_2x2, lattice_2x2, full_2x2, rng):
        """Test that an update needs transitions."""
        cfg = TrainConfig(rows=2, cols=2)
        empty = build_rollout([EpisodeRecord(mask=full_2x2, source=np.arange(4))], cfg, lattice_2x2)
        with pytest.raises(InvalidArgumentError):
            ppo_update(tiny_net_2x2, empty, cfg, AdamOptimizer(tiny_net_2x2.params, 1e-3), rng)


class TestOptimizer:
    """Tests for Adam and gradient clipping."""

    def test_adam_descends_a_quadratic(self):
        """Test that Adam moves parameters towards the minimum of sum(x^2)."""
        params = [np.array([3.0, -2.0])]
        opt = AdamOptimizer(params, learning_rate=0.1)
        for _ in range(300):
            opt.step(params, [2 * params[0]])
        assert np.all(np.abs(params[0]) < 0.5)

    def test_clip_grad_norm(self):
        """Test that the global norm is clipped and reported before clipping."""
        grads, norm = clip_grad_norm([np.array([3.0]), np.array([4.0])], 1.0)
        assert norm == pytest.approx(5.0)
        assert np.sqrt(sum(float(g @ g) for g in grads)) == pytest.approx(1.0)

    def test_small_gradients_untouched(self):
        """Test that gradients under the limit are not scaled."""
        grads, _ = clip_grad_norm([np.array([0.3])], 1.0)
        assert grads[0][0] == 0.3


class TestTopologySampler:
    """Tests for the topology regimes."""

    def test_fixed_regime(self, presets_file, rng):
        """Test that the fixed regime always returns the configured mask."""
        cfg = TrainConfig(rows=3, cols=3, topology_regime=TopologyRegime.FIXED, fixed_topology="8qO")
        sampler = TopologySampler(cfg, build_lattice(3, 3), presets_file)
        masks = {sampler.sample(rng) for _ in range(5)}
        assert len(masks) == 1

    def test_forced_probability_one(self, presets_file, ring_3x3, rng):
        """Test that p = 1 always returns a forced topology."""
        cfg = TrainConfig(
            rows=3, cols=3, topology_regime="forced_mix", forced_topologies=("8qO",), force_prob=1.0
        )
        sampler = TopologySampler(cfg, build_lattice(3, 3), presets_file)
        assert all(sampler.sample(rng) == ring_3x3 for _ in range(10))

    def test_forced_probability_zero_replays_generic(self, presets_file):
        """Test that p = 0 gives exactly the generic regime's topologies."""
        lattice = build_lattice(3, 3)
        generic = TopologySampler(TrainConfig(rows=3, cols=3), lattice, presets_file)
        mixed = TopologySampler(
            TrainConfig(
                rows=3, cols=3, topology_regime="forced_mix", forced_topologies=("8qO",), force_prob=0.0
            ),
            lattice,
            presets_file,
        )
        a, b = np.random.default_rng(5), np.random.default_rng(5)
        assert [generic.sample(a) for _ in range(20)] == [mixed.sample(b) for _ in range(20)]

    def test_forced_mix_needs_topologies(self):
        """Test config validation of the forced regime."""
        with pytest.raises(ValueError):
            TrainConfig(rows=3, cols=3, topology_regime="forced_mix")


class TestPPOTrainer:
    """Tests for rollouts and the training loop."""

    def test_episodes_use_only_active_edges(self, tiny_train_config, presets_file):
        """Test mask safety on the training path and circuit validity of solved episodes."""
        trainer = PPOTrainer(tiny_train_config, presets_file=presets_file)
        seeds = np.random.default_rng(0).integers(0, 2**63 - 1, size=32)
        for ep in trainer.play_episodes(trainer.net, seeds, difficulty=3):
            validate_permutation(ep.source, ep.mask)
            assert all(ep.mask.is_active_edge(a) for a in ep.actions)
            assert len(ep.actions) <= tiny_train_config.max_steps_for(3)
            if ep.solved:
                assert verify(SwapCircuit.from_actions(ep.actions, ep.source, ep.mask))

    def test_greedy_episodes_are_repeatable(self, tiny_train_config, presets_file):
        """Test that the same seeds replay the same episodes."""
        trainer = PPOTrainer(tiny_train_config, presets_file=presets_file)
        seeds = np.arange(10)
        first = trainer.play_episodes(trainer.net, seeds, 2, InferenceMode.GREEDY)
        second = trainer.play_episodes(trainer.net, seeds, 2, InferenceMode.GREEDY)
        assert [e.actions for e in first] == [e.actions for e in second]

    def test_train_writes_outputs(self, tiny_train_config, presets_file, tmp_path):
        """Test log, checkpoints and final model of a short run."""
        result = PPOTrainer(tiny_train_config, presets_file=presets_file).train(tmp_path)
        assert result.model_path == tmp_path / "model.psm"
        assert result.model_path.suffix == MODEL_EXTENSION
        assert result.model_path.exists()
        assert [p.name for p in result.checkpoints] == ["iter_00002.psm"]
        log = read_training_log(result.log_path)
        assert [r.iteration for r in log] == [1, 2, 3]

    def test_curriculum_contract_in_log(self, tiny_train_config, presets_file, tmp_path):
        """Test that logged difficulty never decreases and only rises after a good batch."""
        cfg = tiny_train_config.model_copy(update={"max_iterations": 6})
        result = PPOTrainer(cfg, presets_file=presets_file).train(tmp_path)
        log = read_training_log(result.log_path)
        for before, after in zip(log, log[1:]):
            assert after.difficulty in (before.difficulty, before.difficulty + 1)
            if after.difficulty > before.difficulty:
                assert before.success_rate > cfg.success_threshold

    def test_same_seed_same_model(self, tiny_train_config, presets_file):
        """Test byte-identical models from identical single-threaded runs."""
        a = PPOTrainer(tiny_train_config, presets_file=presets_file).train()
        b = PPOTrainer(tiny_train_config, presets_file=presets_file).train()
        assert encode_model(a.net) == encode_model(b.net)
        assert [r.success_rate for r in a.history] == [r.success_rate for r in b.history]

    def test_evaluation_is_logged(self, tiny_train_config, presets_file):
        """Test that periodic evaluation fills the evaluation columns."""
        cfg = tiny_train_config.model_copy(update={"eval_every": 2, "eval_episodes": 4})
        history = PPOTrainer(cfg, presets_file=presets_file).train().history
        assert history[0].greedy_success_rate is None
        assert history[1].greedy_success_rate is not None
        assert history[1].sampling_success_rate is not None

    def test_zero_iterations_returns_initial_net(self, tiny_train_config, presets_file):
        """Test that max_iterations 0 returns the freshly initialized net unchanged."""
        cfg = tiny_train_config.model_copy(update={"max_iterations": 0})
        result = PPOTrainer(cfg, presets_file=presets_file).train()
        fresh = PolicyNet.initialize(build_lattice(2, 2), cfg.hidden_sizes, seed=cfg.seed)
        assert encode_model(result.net) == encode_model(fresh)
        assert result.history == []

    def test_fixed_path_sorts_every_permutation_optimally(self):
        """Test that a fixed-regime 3-node path learns optimal circuits for all 6 permutations."""
        cfg = TrainConfig(
            rows=1,
            cols=3,
            topology_regime=TopologyRegime.FIXED,
            fixed_topology="full",
            max_iterations=60,
            checkpoint_every=0,
            seed=0,
        )
        net = PPOTrainer(cfg).train().net
        mask = full_mask(build_lattice(1, 3))
        for perm in permutations(range(3)):
            perm = np.array(perm)
            result = synthesize(net, perm, mask, InferenceMode.GREEDY)
            assert result.circuit is not None
            assert result.circuit.gate_count == bfs_optimal(perm, mask).swaps

    def test_regime_string_from_model_copy(self, tiny_train_config, presets_file):
        """Test that a regime set through model_copy is coerced back to the enum."""
        cfg = tiny_train_config.model_copy(
            update={"topology_regime": "forced_mix", "forced_topologies": ("full",), "max_iterations": 1}
        )
        trainer = PPOTrainer(cfg, presets_file=presets_file)
        assert trainer.cfg.topology_regime is TopologyRegime.FORCED_MIX
        assert trainer.sampler.forced == [full_mask(build_lattice(2, 2))]
        assert len(trainer.train().history) == 1

    def test_lattice_mismatch(self, tiny_train_config, tiny_net_3x3):
        """Test that the starting network must match the config lattice."""
        with pytest.raises(InvalidArgumentError):
            PPOTrainer(tiny_train_config, net=tiny_net_3x3)


class TestFineTune:
    """Tests for fine-tuning."""

    def test_base_model_untouched(self, tiny_train_config, tiny_net_2x2, presets_file):
        """Test that fine-tuning trains a copy."""
        before = [p.copy() for p in tiny_net_2x2.params]
        cfg = tiny_train_config.model_copy(update={"max_iterations": 1})
        result = fine_tune(tiny_net_2x2, cfg, presets_file=presets_file)
        assert all(np.array_equal(p, q) for p, q in zip(before, tiny_net_2x2.params))
        assert result.net is not tiny_net_2x2
        assert not all(np.array_equal(p, q) for p, q in zip(before, result.net.params))

    def test_lattice_mismatch(self, tiny_train_config, tiny_net_3x3):
        """Test that the base model must match the config lattice."""
        with pytest.raises(InvalidArgumentError):
            fine_tune(tiny_net_3x3, tiny_train_config)

    def test_zero_force_probability_replays_continued_training(
        self, tiny_train_config, tiny_net_2x2, presets_file
    ):
        """Test that forced_mix with p = 0 follows the plain continued-training trajectory."""
        mixed = tiny_train_config.model_copy(
            update={
                "topology_regime": TopologyRegime.FORCED_MIX,
                "forced_topologies": ("full",),
                "force_prob": 0.0,
            }
        )
        tuned = fine_tune(tiny_net_2x2, mixed, presets_file=presets_file)
        plain = PPOTrainer(tiny_train_config, net=tiny_net_2x2.copy(), presets_file=presets_file).train()
        assert encode_model(tuned.net) == encode_model(plain.net)
        assert [r.success_rate for r in tuned.history] == [r.success_rate for r in plain.history]

    def test_regime_string_from_model_copy(self, tiny_train_config, tiny_net_2x2, presets_file):
        """Test that fine-tuning accepts a config whose regime was set through model_copy."""
        cfg = tiny_train_config.model_copy(
            update={"topology_regime": "forced_mix", "forced_topologies": ("full",), "max_iterations": 1}
        )
        result = fine_tune(tiny_net_2x2, cfg, presets_file=presets_file)
        assert len(result.history) == 1
