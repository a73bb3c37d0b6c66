"""Domain entities."""

from permsynth.domain.entities.benchmark import (
    BenchConfig,
    BenchMethod,
    BenchRecord,
    HistogramBin,
    RatioRow,
    RatioSummary,
)
from permsynth.domain.entities.circuit import Permutation, SwapCircuit, SynthesisResult
from permsynth.domain.entities.lattice import Embedding, Lattice, TopologyMask, TopologyPreset
from permsynth.domain.entities.manifest import RunManifest
from permsynth.domain.entities.training import (
    CurriculumState,
    InferenceMode,
    IterationLog,
    LossStats,
    RewardConfig,
    TopologyRegime,
    TrainConfig,
)

__all__ = [
    "BenchConfig",
    "BenchMethod",
    "BenchRecord",
    "CurriculumState",
    "Embedding",
    "HistogramBin",
    "InferenceMode",
    "IterationLog",
    "Lattice",
    "LossStats",
    "Permutation",
    "RatioRow",
    "RatioSummary",
    "RewardConfig",
    "RunManifest",
    "SwapCircuit",
    "SynthesisResult",
    "TopologyMask",
    "TopologyPreset",
    "TopologyRegime",
    "TrainConfig",
]
