"""
PPO training with action masking and a success-rate curriculum.

One iteration:

1. collect a batch of episodes with the current policy (sampling mode),
   each on a topology chosen by the configured regime and an instance
   scrambled at the current difficulty;
2. compute GAE advantages per episode;
3. run clipped-objective PPO epochs over shuffled minibatches;
4. raise the difficulty when the batch success rate beats the threshold.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import numpy.typing as npt

from permsynth.core.exceptions import InvalidArgumentError, NonFiniteLossError
from permsynth.core.logging import get_logger
from permsynth.domain.entities.circuit import Permutation
from permsynth.domain.entities.lattice import Lattice, TopologyMask
from permsynth.domain.entities.training import (
    CurriculumState,
    InferenceMode,
    IterationLog,
    LossStats,
    TopologyRegime,
    TrainConfig,
)
from permsynth.domain.services.environment import (
    curriculum_update,
    reset,
    sample_instance,
    step,
)
from permsynth.domain.services.policy_network import (
    FloatArray,
    PolicyNet,
    encode_batch,
    greedy_action,
    masked_log_softmax,
    observation_size,
    sample_action,
)
from permsynth.domain.services.topology import (
    build_lattice,
    resolve_topology,
    sample_connected_mask,
)

logger = get_logger(__name__)

ADVANTAGE_EPS = 1e-8
_ROLLOUT_STREAM = 1
_EVAL_STREAM = 2


def revalidate(cfg: TrainConfig) -> TrainConfig:
    """Re-run field validation, which ``model_copy(update=...)`` skips."""
    return TrainConfig.model_validate(dict(cfg))


# ============================================
# Optimiser
# ============================================


class AdamOptimizer:
    """Bias-corrected Adam over a list of numpy parameter arrays (updated in place)."""

    def __init__(
        self,
        params: list[FloatArray],
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros(p.shape, dtype=np.float64) for p in params]
        self.v = [np.zeros(p.shape, dtype=np.float64) for p in params]

    def step(self, params: list[FloatArray], grads: list[FloatArray]) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = self.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p -= update.astype(p.dtype)


def clip_grad_norm(grads: list[FloatArray], max_norm: float) -> tuple[list[FloatArray], float]:
    """Scale gradients so their global L2 norm is at most ``max_norm``."""
    norm = float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads)))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        grads = [g * scale for g in grads]
    return grads, norm


# ============================================
# Rollouts
# ============================================


@dataclass
class EpisodeRecord:
    """Transitions of one episode, as sampled."""

    mask: TopologyMask
    source: Permutation
    observations: list[npt.NDArray[np.float32]] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    log_probs: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    solved: bool = False
    final_value: float = 0.0

    @property
    def gates(self) -> int:
        return len(self.actions)


@dataclass
class Rollout:
    """Flattened transitions of a batch with their advantages and return targets."""

    observations: npt.NDArray[np.float32]
    actions: npt.NDArray[np.int64]
    old_log_probs: npt.NDArray[np.float64]
    values: npt.NDArray[np.float64]
    advantages: npt.NDArray[np.float64]
    returns: npt.NDArray[np.float64]
    edge_masks: npt.NDArray[np.bool_]

    @property
    def size(self) -> int:
        return int(self.actions.shape[0])

    def take(self, index: npt.NDArray[np.int64]) -> "Rollout":
        return Rollout(
            observations=self.observations[index],
            actions=self.actions[index],
            old_log_probs=self.old_log_probs[index],
            values=self.values[index],
            advantages=self.advantages[index],
            returns=self.returns[index],
            edge_masks=self.edge_masks[index],
        )


def compute_gae(
    rewards: npt.ArrayLike,
    values: npt.ArrayLike,
    gamma: float,
    lam: float,
    bootstrap_value: float = 0.0,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """
    Generalised advantage estimates for one episode.

    Args:
        rewards: Per-step rewards
        values: Value estimates of the states the actions were taken in
        gamma: Discount
        lam: GAE lambda
        bootstrap_value: Value after the last transition (0 at terminal states)

    Returns:
        (advantages, returns) where returns = advantages + values
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    advantages = np.zeros_like(rewards)
    running = 0.0
    for t in reversed(range(rewards.shape[0])):
        next_value = values[t + 1] if t + 1 < rewards.shape[0] else bootstrap_value
        delta = rewards[t] + gamma * next_value - values[t]
        running = delta + gamma * lam * running
        advantages[t] = running
    return advantages, advantages + values


def build_rollout(episodes: list[EpisodeRecord], cfg: TrainConfig, lattice: Lattice) -> Rollout:
    """Run GAE per episode and concatenate every transition of the batch."""
    parts: dict[str, list[Any]] = {k: [] for k in ("obs", "act", "logp", "val", "adv", "ret", "mask")}
    for ep in episodes:
        if not ep.actions:
            continue
        bootstrap = ep.final_value if (cfg.bootstrap_truncated and not ep.solved) else 0.0
        adv, ret = compute_gae(ep.rewards, ep.values, cfg.gamma, cfg.gae_lambda, bootstrap)
        parts["obs"].append(np.stack(ep.observations))
        parts["act"].append(np.asarray(ep.actions, dtype=np.int64))
        parts["logp"].append(np.asarray(ep.log_probs, dtype=np.float64))
        parts["val"].append(np.asarray(ep.values, dtype=np.float64))
        parts["adv"].append(adv)
        parts["ret"].append(ret)
        parts["mask"].append(np.repeat(ep.mask.edge_mask[None, :], ep.gates, axis=0))

    if not parts["act"]:
        return Rollout(
            observations=np.zeros((0, observation_size(lattice)), dtype=np.float32),
            actions=np.zeros(0, dtype=np.int64),
            old_log_probs=np.zeros(0),
            values=np.zeros(0),
            advantages=np.zeros(0),
            returns=np.zeros(0),
            edge_masks=np.zeros((0, lattice.num_edges), dtype=bool),
        )
    return Rollout(
        observations=np.concatenate(parts["obs"]),
        actions=np.concatenate(parts["act"]),
        old_log_probs=np.concatenate(parts["logp"]),
        values=np.concatenate(parts["val"]),
        advantages=np.concatenate(parts["adv"]),
        returns=np.concatenate(parts["ret"]),
        edge_masks=np.concatenate(parts["mask"]),
    )


# ============================================
# PPO objective
# ============================================


def ppo_loss_and_grads(
    net: PolicyNet, batch: Rollout, cfg: TrainConfig, normalize_advantages: bool = True
) -> tuple[float, list[FloatArray], dict[str, float]]:
    """
    Clipped PPO loss of a minibatch and its exact parameter gradients.

    loss = -mean(min(r A, clip(r) A)) + value_coef * mean((v - R)^2)
           - entropy_coef * mean(H)

    where r is the probability ratio of the taken action and H the entropy
    of the masked distribution.

    Raises:
        NonFiniteLossError: the loss is NaN or infinite
    """
    size = batch.size
    advantages = batch.advantages
    if normalize_advantages and size > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + ADVANTAGE_EPS)

    logits, values, cache = net.forward_with_cache(batch.observations)
    values = values.astype(np.float64)
    log_probs, probs = masked_log_softmax(logits, batch.edge_masks)
    rows = np.arange(size)
    new_log_probs = log_probs[rows, batch.actions]

    ratio = np.exp(new_log_probs - batch.old_log_probs)
    eps = cfg.clip_epsilon
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps) * advantages
    surrogate = np.minimum(unclipped, clipped)

    plogp = probs * log_probs
    entropy = -plogp.sum(axis=1)
    value_error = values - batch.returns

    policy_loss = -float(surrogate.mean())
    value_loss = float(np.mean(value_error**2))
    mean_entropy = float(entropy.mean())
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * mean_entropy

    info = {
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": mean_entropy,
        "approx_kl": float(np.mean(batch.old_log_probs - new_log_probs)),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > eps)),
    }
    if not np.isfinite(loss):
        raise NonFiniteLossError("non-finite PPO loss", {**info, "loss": loss, "batch": size})

    # surrogate gradient flows only where the unclipped branch is selected
    d_surrogate = np.where(unclipped <= clipped, advantages, 0.0)
    coef = -(d_surrogate * ratio) / size
    one_hot = np.zeros_like(probs)
    one_hot[rows, batch.actions] = 1.0
    d_logits = coef[:, None] * (one_hot - probs)
    d_logits += cfg.entropy_coef * probs * (log_probs + entropy[:, None]) / size
    d_values = 2.0 * cfg.value_coef * value_error / size

    grads = net.backward(cache, d_logits, d_values)
    return loss, grads, info


def ppo_update(
    net: PolicyNet,
    rollout: Rollout,
    cfg: TrainConfig,
    optimizer: AdamOptimizer,
    rng: np.random.Generator,
) -> tuple[PolicyNet, LossStats]:
    """
    Run ``ppo_epochs`` passes of shuffled minibatch updates on ``net`` in place.

    Raises:
        InvalidArgumentError: empty rollout
        NonFiniteLossError: a minibatch loss is not finite
    """
    if rollout.size == 0:
        raise InvalidArgumentError("ppo_update needs at least one transition")

    totals = dict.fromkeys(
        ("policy_loss", "value_loss", "entropy", "approx_kl", "clip_fraction"), 0.0
    )
    grad_norm_total = 0.0
    minibatches = 0
    for _ in range(cfg.ppo_epochs):
        order = rng.permutation(rollout.size)
        for start in range(0, rollout.size, cfg.minibatch_size):
            batch = rollout.take(order[start : start + cfg.minibatch_size])
            _, grads, info = ppo_loss_and_grads(net, batch, cfg)
            grads, norm = clip_grad_norm(grads, cfg.max_grad_norm)
            optimizer.step(net.params, grads)
            for key in totals:
                totals[key] += info[key]
            grad_norm_total += norm
            minibatches += 1

    stats = LossStats(
        **{key: value / minibatches for key, value in totals.items()},
        grad_norm=grad_norm_total / minibatches,
        minibatches=minibatches,
    )
    return net, stats


# ============================================
# Topology regimes
# ============================================


class TopologySampler:
    """Chooses the topology of each training episode according to the regime."""

    def __init__(self, cfg: TrainConfig, lattice: Lattice, presets_file: Optional[Path] = None):
        self.regime = cfg.topology_regime
        self.lattice = lattice
        self.size_range = cfg.resolved_size_range
        self.force_prob = cfg.force_prob
        self.fixed: Optional[TopologyMask] = None
        self.forced: list[TopologyMask] = []
        if self.regime is TopologyRegime.FIXED:
            assert cfg.fixed_topology is not None
            self.fixed = resolve_topology(cfg.fixed_topology, lattice, presets_file)
        elif self.regime is TopologyRegime.FORCED_MIX:
            self.forced = [resolve_topology(t, lattice, presets_file) for t in cfg.forced_topologies]

    def sample(self, rng: np.random.Generator) -> TopologyMask:
        if self.fixed is not None:
            return self.fixed
        # p = 0 consumes no draw, so it replays the generic stream exactly
        if self.forced and self.force_prob > 0 and rng.random() < self.force_prob:
            return self.forced[int(rng.integers(len(self.forced)))]
        return sample_connected_mask(self.lattice, self.size_range, rng)


# ============================================
# Trainer
# ============================================


@dataclass
class TrainingResult:
    """Outcome of a training run."""

    net: PolicyNet
    history: list[IterationLog]
    curriculum: CurriculumState
    model_path: Optional[Path] = None
    log_path: Optional[Path] = None
    checkpoints: list[Path] = field(default_factory=list)


class PPOTrainer:
    """Owns the mutable network, the optimiser state and the curriculum of one run."""

    def __init__(
        self,
        cfg: TrainConfig,
        net: Optional[PolicyNet] = None,
        presets_file: Optional[Path] = None,
    ):
        """
        Initialize trainer.

        Args:
            cfg: Training configuration
            net: Starting network (trained in place); None initialises one from cfg.seed
            presets_file: Topology preset file used to resolve regime topologies

        Raises:
            InvalidArgumentError: net built for another lattice
        """
        cfg = self.cfg = revalidate(cfg)
        self.lattice = build_lattice(cfg.rows, cfg.cols)
        if net is None:
            net = PolicyNet.initialize(self.lattice, cfg.hidden_sizes, seed=cfg.seed)
        elif not net.matches(self.lattice):
            raise InvalidArgumentError(
                f"network is for a {net.lattice.rows}x{net.lattice.cols} lattice, "
                f"config asks for {cfg.rows}x{cfg.cols}"
            )
        self.net = net
        self.optimizer = AdamOptimizer(net.params, cfg.learning_rate)
        self.sampler = TopologySampler(cfg, self.lattice, presets_file)
        self.rng = np.random.default_rng([cfg.seed, _ROLLOUT_STREAM])
        self.eval_rng = np.random.default_rng([cfg.seed, _EVAL_STREAM])
        self.curriculum = CurriculumState(
            difficulty=cfg.initial_difficulty, success_threshold=cfg.success_threshold
        )
        self.history: list[IterationLog] = []

    # ----------------------------------------
    # Rollout collection
    # ----------------------------------------

    def play_episodes(
        self,
        net: PolicyNet,
        seeds: npt.NDArray[np.int64],
        difficulty: int,
        mode: InferenceMode = InferenceMode.SAMPLING,
    ) -> list[EpisodeRecord]:
        """
        Play one episode per seed, stepping all live episodes together.

        Each seed owns the episode's random stream: topology, instance and
        sampled actions all come from it.
        """
        cfg = self.cfg
        max_steps = cfg.max_steps_for(difficulty)
        episodes: list[EpisodeRecord] = []
        states = []
        streams = []
        for seed in seeds:
            rng = np.random.default_rng(int(seed))
            mask = self.sampler.sample(rng)
            perm = sample_instance(mask, difficulty if mask.num_active_edges else 0, rng)
            state = reset(perm, mask, max_steps)
            states.append(state)
            streams.append(rng)
            episodes.append(EpisodeRecord(mask=mask, source=perm, solved=state.solved))

        live = [i for i, s in enumerate(states) if not s.done]
        while live:
            edge_masks = np.stack([states[i].mask.edge_mask for i in live])
            obs = encode_batch(
                np.stack([states[i].perm for i in live]),
                np.stack([states[i].mask.node_mask for i in live]),
                edge_masks,
            )
            logits, values = net.forward(obs)
            log_probs, probs = masked_log_softmax(logits, edge_masks)
            for row, i in enumerate(live):
                if mode is InferenceMode.GREEDY:
                    action = greedy_action(logits[row], edge_masks[row])
                else:
                    action = sample_action(probs[row], streams[i])
                result = step(states[i], action, cfg.rewards)
                ep = episodes[i]
                ep.observations.append(obs[row])
                ep.actions.append(action)
                ep.log_probs.append(float(log_probs[row, action]))
                ep.values.append(float(values[row]))
                ep.rewards.append(result.reward)
                ep.solved = result.state.solved
                states[i] = result.state
            live = [i for i in live if not states[i].done]

        if cfg.bootstrap_truncated:
            cut = [i for i, ep in enumerate(episodes) if ep.actions and not ep.solved]
            if cut:
                obs = encode_batch(
                    np.stack([states[i].perm for i in cut]),
                    np.stack([states[i].mask.node_mask for i in cut]),
                    np.stack([states[i].mask.edge_mask for i in cut]),
                )
                _, final_values = net.forward(obs)
                for row, i in enumerate(cut):
                    episodes[i].final_value = float(final_values[row])
        return episodes

    def _play_parallel(
        self, seeds: npt.NDArray[np.int64], difficulty: int, mode: InferenceMode
    ) -> list[EpisodeRecord]:
        threads = min(self.cfg.threads, len(seeds))
        if threads <= 1:
            return self.play_episodes(self.net, seeds, difficulty, mode)
        snapshot = self.net.copy()
        chunks = np.array_split(seeds, threads)
        with ThreadPoolExecutor(max_workers=threads) as executor:
            parts = list(
                executor.map(lambda chunk: self.play_episodes(snapshot, chunk, difficulty, mode), chunks)
            )
        return [ep for part in parts for ep in part]

    def collect_batch(self) -> tuple[list[EpisodeRecord], float]:
        """
        Play ``batch_episodes`` sampling-mode episodes at the current difficulty.

        Returns:
            (episodes, fraction that reached identity)
        """
        seeds = self.rng.integers(0, 2**63 - 1, size=self.cfg.batch_episodes)
        episodes = self._play_parallel(seeds, self.curriculum.difficulty, InferenceMode.SAMPLING)
        success_rate = float(np.mean([ep.solved for ep in episodes])) if episodes else 0.0
        return episodes, success_rate

    def evaluate(self, episodes: int, mode: InferenceMode, difficulty: Optional[int] = None) -> float:
        """Success rate of the current policy on fresh instances (no update)."""
        seeds = self.eval_rng.integers(0, 2**63 - 1, size=episodes)
        level = self.curriculum.difficulty if difficulty is None else difficulty
        played = self._play_parallel(seeds, level, mode)
        return float(np.mean([ep.solved for ep in played])) if played else 0.0

    # ----------------------------------------
    # Training loop
    # ----------------------------------------

    def run_iteration(self, iteration: int) -> IterationLog:
        """Collect, update and advance the curriculum once."""
        cfg = self.cfg
        difficulty = self.curriculum.difficulty
        episodes, success_rate = self.collect_batch()
        rollout = build_rollout(episodes, cfg, self.lattice)

        stats = LossStats()
        if rollout.size:
            _, stats = ppo_update(self.net, rollout, cfg, self.optimizer, self.rng)

        self.curriculum = curriculum_update(self.curriculum, success_rate)

        solved_gates = [ep.gates for ep in episodes if ep.solved]
        greedy_rate = sampling_rate = None
        if cfg.eval_every and iteration % cfg.eval_every == 0:
            greedy_rate = self.evaluate(cfg.eval_episodes, InferenceMode.GREEDY, difficulty)
            sampling_rate = self.evaluate(cfg.eval_episodes, InferenceMode.SAMPLING, difficulty)

        record = IterationLog(
            iteration=iteration,
            difficulty=difficulty,
            success_rate=success_rate,
            mean_gates=float(np.mean(solved_gates)) if solved_gates else None,
            policy_loss=stats.policy_loss,
            value_loss=stats.value_loss,
            entropy=stats.entropy,
            approx_kl=stats.approx_kl,
            clip_fraction=stats.clip_fraction,
            transitions=rollout.size,
            greedy_success_rate=greedy_rate,
            sampling_success_rate=sampling_rate,
        )
        self.history.append(record)
        logger.info(
            "Iteration finished",
            iteration=iteration,
            difficulty=difficulty,
            success_rate=round(success_rate, 4),
            transitions=rollout.size,
            policy_loss=round(stats.policy_loss, 6),
            value_loss=round(stats.value_loss, 6),
        )
        return record

    def train(self, output_dir: Optional[Path] = None) -> TrainingResult:
        """
        Run ``max_iterations`` iterations.

        With an output directory the log goes to ``train_log.jsonl``, periodic
        checkpoints to ``checkpoints/`` and the final network to ``model.psm``.
        """
        from permsynth.infrastructure.files.model_container import MODEL_EXTENSION, save_model
        from permsynth.infrastructure.files.training_log import TrainingLogWriter

        cfg = self.cfg
        logger.info(
            "Training started",
            rows=cfg.rows,
            cols=cfg.cols,
            regime=cfg.topology_regime.value,
            iterations=cfg.max_iterations,
            seed=cfg.seed,
            parameters=self.net.parameter_count,
        )
        result = TrainingResult(net=self.net, history=self.history, curriculum=self.curriculum)

        if output_dir is None:
            for iteration in range(1, cfg.max_iterations + 1):
                self.run_iteration(iteration)
        else:
            output_dir = Path(output_dir)
            result.log_path = output_dir / "train_log.jsonl"
            with TrainingLogWriter(result.log_path) as log:
                for iteration in range(1, cfg.max_iterations + 1):
                    log.write(self.run_iteration(iteration))
                    if cfg.checkpoint_every and iteration % cfg.checkpoint_every == 0:
                        path = output_dir / "checkpoints" / f"iter_{iteration:05d}{MODEL_EXTENSION}"
                        result.checkpoints.append(save_model(self.net, path))
            result.model_path = save_model(self.net, output_dir / f"model{MODEL_EXTENSION}")

        result.curriculum = self.curriculum
        logger.info(
            "Training finished",
            iterations=len(self.history),
            difficulty=self.curriculum.difficulty,
        )
        return result


def train(
    cfg: TrainConfig,
    output_dir: Optional[Path] = None,
    presets_file: Optional[Path] = None,
) -> TrainingResult:
    """Train a fresh network from ``cfg``."""
    return PPOTrainer(cfg, presets_file=presets_file).train(output_dir)


def fine_tune(
    base: PolicyNet,
    cfg: TrainConfig,
    output_dir: Optional[Path] = None,
    presets_file: Optional[Path] = None,
) -> TrainingResult:
    """
    Continue training a copy of ``base`` under ``cfg`` with a fresh optimiser.

    ``base`` itself is never modified.

    Raises:
        InvalidArgumentError: base network built for another lattice
    """
    cfg = revalidate(cfg)
    lattice = build_lattice(cfg.rows, cfg.cols)
    if not base.matches(lattice):
        raise InvalidArgumentError(
            f"base model is for a {base.lattice.rows}x{base.lattice.cols} lattice, "
            f"config asks for {cfg.rows}x{cfg.cols}"
        )
    if base.hidden_sizes != cfg.hidden_sizes:
        logger.warning(
            "Fine-tuning keeps the base model widths",
            base=list(base.hidden_sizes),
            configured=list(cfg.hidden_sizes),
        )
    logger.info("Fine-tuning from base model", regime=cfg.topology_regime.value)
    return PPOTrainer(cfg, net=base.copy(), presets_file=presets_file).train(output_dir)
