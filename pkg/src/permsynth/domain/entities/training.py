"""Training domain entities: rewards, curriculum, PPO configuration and logs."""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class RewardConfig(BaseModel):
    """Reward shape: large success bonus, small per-gate penalty."""

    model_config = ConfigDict(frozen=True)

    success_reward: float = Field(default=10.0, gt=0, description="Reward on reaching identity")
    step_penalty: float = Field(default=-0.1, lt=0, description="Reward added for every gate")


class CurriculumState(BaseModel):
    """Difficulty level and the success rate that last drove it."""

    model_config = ConfigDict(frozen=True)

    difficulty: int = Field(default=1, ge=1)
    success_threshold: float = Field(default=0.85, gt=0, lt=1)
    window_success_rate: float = Field(default=0.0, ge=0, le=1)


class InferenceMode(str, Enum):
    """How actions are chosen from the masked distribution."""

    GREEDY = "greedy"
    SAMPLING = "sampling"


class TopologyRegime(str, Enum):
    """Where training episodes take their topology from."""

    GENERIC = "generic"  # fresh random connected mask per episode
    FIXED = "fixed"  # one mask for every episode (topology-specific model)
    FORCED_MIX = "forced_mix"  # forced presets with probability p, else random


class TrainConfig(BaseModel):
    """Complete training configuration (file values overridden by CLI flags)."""

    model_config = ConfigDict(frozen=True)

    # Lattice / network
    rows: int = Field(default=5, ge=1)
    cols: int = Field(default=5, ge=1)
    hidden_sizes: tuple[int, ...] = (512, 512, 512)

    # Environment
    rewards: RewardConfig = Field(default_factory=RewardConfig)
    success_threshold: float = Field(default=0.85, gt=0, lt=1)
    initial_difficulty: int = Field(default=1, ge=1)
    max_steps_factor: int = Field(default=2, ge=1)
    max_steps_slack: int = Field(default=8, ge=0)

    # PPO
    batch_episodes: int = Field(default=256, ge=1)
    ppo_epochs: int = Field(default=4, ge=1)
    minibatch_size: int = Field(default=1024, ge=1)
    clip_epsilon: float = Field(default=0.2, gt=0, lt=1)
    gamma: float = Field(default=0.99, gt=0, le=1)
    gae_lambda: float = Field(default=0.95, gt=0, le=1)
    value_coef: float = Field(default=0.5, ge=0)
    entropy_coef: float = Field(default=0.01, ge=0)
    learning_rate: float = Field(default=3e-4, gt=0)
    max_grad_norm: float = Field(default=0.5, gt=0)
    bootstrap_truncated: bool = False

    # Topology regime
    topology_regime: TopologyRegime = TopologyRegime.GENERIC
    size_range: tuple[int, int] | None = None
    fixed_topology: str | None = None
    forced_topologies: tuple[str, ...] = ()
    force_prob: float = Field(default=0.25, ge=0, le=1)

    # Run
    max_iterations: int = Field(default=1000, ge=0)
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)
    checkpoint_every: int = Field(default=50, ge=0)
    eval_every: int = Field(default=0, ge=0)
    eval_episodes: int = Field(default=64, ge=1)

    @field_validator("hidden_sizes")
    @classmethod
    def validate_hidden(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        """Three positive hidden widths."""
        if len(v) != 3 or any(w < 1 for w in v):
            raise ValueError("hidden_sizes must be three positive widths")
        return v

    @model_validator(mode="after")
    def validate_regime(self) -> "TrainConfig":
        """Cross-field checks on lattice size and topology regime."""
        n = self.rows * self.cols
        if n < 2:
            raise ValueError("lattice needs at least 2 nodes")
        lo, hi = self.resolved_size_range
        if not 1 <= lo <= hi <= n:
            raise ValueError(f"size_range must satisfy 1 <= min <= max <= {n}")
        if self.topology_regime is TopologyRegime.FIXED and not self.fixed_topology:
            raise ValueError("fixed regime needs fixed_topology")
        if self.topology_regime is TopologyRegime.FORCED_MIX and not self.forced_topologies:
            raise ValueError("forced_mix regime needs at least one forced topology")
        return self

    @property
    def resolved_size_range(self) -> tuple[int, int]:
        """Sampler size range; defaults to (2, rows*cols)."""
        if self.size_range is not None:
            return self.size_range
        n = self.rows * self.cols
        return (min(2, n), n)

    def max_steps_for(self, difficulty: int) -> int:
        """Episode step budget for a difficulty level."""
        return self.max_steps_factor * difficulty + self.max_steps_slack


class LossStats(BaseModel):
    """Aggregated statistics of one PPO update."""

    policy_loss: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    approx_kl: float = 0.0
    clip_fraction: float = 0.0
    grad_norm: float = 0.0
    minibatches: int = 0


class IterationLog(BaseModel):
    """One line of the training log."""

    iteration: int
    difficulty: int
    success_rate: float
    mean_gates: float | None = Field(default=None, description="Mean gates of successful episodes")
    policy_loss: float
    value_loss: float
    entropy: float
    approx_kl: float = 0.0
    clip_fraction: float = 0.0
    transitions: int = 0
    greedy_success_rate: float | None = None
    sampling_success_rate: float | None = None
