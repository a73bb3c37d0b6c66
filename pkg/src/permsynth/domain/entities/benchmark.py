"""Benchmark domain entities."""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator

from permsynth.domain.entities.training import InferenceMode


class BenchMethod(str, Enum):
    """Synthesis methods compared by the benchmark."""

    GENERIC = "generic"
    SPECIFIC = "specific"
    TOKENSWAP = "tokenswap"
    ORACLE = "oracle"


class BenchRecord(BaseModel):
    """One (instance, method) row; ``verified`` False marks a synthesis failure."""

    model_config = ConfigDict(frozen=True)

    topology: str
    instance: int = Field(..., ge=0)
    method: BenchMethod
    gates: int = Field(..., ge=0)
    depth: int = Field(..., ge=0)
    time_ns: int = Field(default=0, ge=0)
    verified: bool
    attempts: int = Field(default=0, ge=0)

    @property
    def failed(self) -> bool:
        return not self.verified


class RatioRow(BaseModel):
    """Comparison of one method against the generic model on one topology.

    Ratios are method / generic: values above 1 mean the generic model wins.
    """

    topology: str
    method: BenchMethod
    frac_lt_095_gates: float = Field(..., ge=0, le=1)
    frac_gt_105_gates: float = Field(..., ge=0, le=1)
    frac_lt_095_depth: float = Field(..., ge=0, le=1)
    frac_gt_105_depth: float = Field(..., ge=0, le=1)
    mean_time_ratio: float | None = None
    failures: int = Field(default=0, ge=0)
    compared: int = Field(default=0, ge=0)
    excluded_identity: int = Field(default=0, ge=0)


class HistogramBin(BaseModel):
    """Count of ratios falling in [bin_low, bin_high); open ends mark overflow bins."""

    topology: str
    method: BenchMethod
    metric: str
    bin_low: float | None
    bin_high: float | None
    count: int = Field(..., ge=0)


class RatioSummary(BaseModel):
    """Per-topology, per-method ratio statistics plus histogram data."""

    rows: list[RatioRow] = Field(default_factory=list)
    histograms: list[HistogramBin] = Field(default_factory=list)

    def row(self, topology: str, method: BenchMethod) -> RatioRow:
        """Look up the row of a (topology, method) pair."""
        for r in self.rows:
            if r.topology == topology and r.method == method:
                return r
        raise KeyError((topology, method))


class BenchConfig(BaseModel):
    """Benchmark suite definition."""

    model_config = ConfigDict(frozen=True)

    rows: int = Field(default=5, ge=1)
    cols: int = Field(default=5, ge=1)
    topologies: tuple[str, ...] = ()
    instances: int = Field(default=1000, ge=0)
    methods: tuple[BenchMethod, ...] = (
        BenchMethod.GENERIC,
        BenchMethod.SPECIFIC,
        BenchMethod.TOKENSWAP,
    )
    generic_model: str | None = None
    specific_models: dict[str, str] = Field(default_factory=dict)
    attempts: int = Field(default=10, ge=1)
    specific_mode: InferenceMode = InferenceMode.GREEDY
    trials: int = Field(default=1000, ge=1)
    record_timing: bool = True
    timing_repeats: int = Field(default=3, ge=1)
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)

    @field_validator("methods")
    @classmethod
    def unique_methods(cls, v: tuple[BenchMethod, ...]) -> tuple[BenchMethod, ...]:
        """Methods are listed once each, in the given order."""
        if len(set(v)) != len(v):
            raise ValueError("methods must not repeat")
        return v
