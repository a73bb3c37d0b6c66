"""
Benchmark harness: generic model vs topology-specific models vs token swapping.

Every method sees the same instances. The generic model solves each
instance on a uniformly random placement (rotation, reflection and
translation) of the topology on the lattice; the other methods use the
topology's own placement. Gate counts and depths are invariant under
placement, so the comparison is per instance.
"""

import statistics
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from permsynth.core.config_loader import get_topology_catalog
from permsynth.core.exceptions import ConfigError, VerificationError
from permsynth.core.logging import get_logger
from permsynth.domain.entities.benchmark import (
    BenchConfig,
    BenchMethod,
    BenchRecord,
    HistogramBin,
    RatioRow,
    RatioSummary,
)
from permsynth.domain.entities.circuit import Permutation, SwapCircuit
from permsynth.domain.entities.lattice import Embedding, Lattice, TopologyMask
from permsynth.domain.entities.training import InferenceMode
from permsynth.domain.services.policy_network import PolicyNet
from permsynth.domain.services.swap_oracle import bfs_optimal
from permsynth.domain.services.synthesizer import synthesize, verify
from permsynth.domain.services.token_swapper import token_swap
from permsynth.domain.services.topology import (
    build_lattice,
    canonical_embedding,
    mask_embedding,
    preset_embeddings,
    resolve_topology,
    transport_permutation,
)

logger = get_logger(__name__)

HISTOGRAM_LOW = 0.5
HISTOGRAM_HIGH = 2.0
HISTOGRAM_WIDTH = 0.05
LOWER_THRESHOLD = 0.95
UPPER_THRESHOLD = 1.05

# fixed draw order so enabling a method never changes another method's stream
_SEED_ORDER = (BenchMethod.GENERIC, BenchMethod.SPECIFIC, BenchMethod.TOKENSWAP, BenchMethod.ORACLE)


@dataclass
class SuiteModels:
    """Networks used by a suite run."""

    generic: Optional[PolicyNet] = None
    specific: dict[str, PolicyNet] = field(default_factory=dict)


@dataclass(frozen=True)
class _Topology:
    name: str
    canonical: Embedding
    placements: list[Embedding]


def load_suite_models(config: BenchConfig) -> SuiteModels:
    """
    Load the model containers named by the config for the requested methods.

    Raises:
        ConfigError: a requested model method has no model path
    """
    from permsynth.infrastructure.files.model_container import load_model

    models = SuiteModels()
    if BenchMethod.GENERIC in config.methods:
        if not config.generic_model:
            raise ConfigError("bench method 'generic' needs models.generic")
        models.generic = load_model(Path(config.generic_model))
    if BenchMethod.SPECIFIC in config.methods:
        for name in config.topologies:
            path = config.specific_models.get(name)
            if not path:
                raise ConfigError(f"bench method 'specific' needs a model for topology {name}")
            models.specific[name] = load_model(Path(path))
    return models


def _resolve_topologies(
    config: BenchConfig, lattice: Lattice, presets_file: Optional[Path]
) -> list[_Topology]:
    catalog = get_topology_catalog(presets_file)
    topologies = []
    for name in config.topologies:
        if name in catalog:
            preset = catalog.get(name)
            canonical = canonical_embedding(preset, lattice)
            placements = preset_embeddings(preset, lattice)
        else:
            canonical = mask_embedding(resolve_topology(name, lattice, presets_file))
            placements = [canonical]
        topologies.append(_Topology(name=name, canonical=canonical, placements=placements))
    return topologies


def random_instance(mask: TopologyMask, rng: np.random.Generator) -> Permutation:
    """Uniformly random permutation of the active nodes (inactive nodes fixed)."""
    perm = np.arange(mask.lattice.num_nodes, dtype=np.int64)
    active = mask.active_node_ids
    perm[active] = rng.permutation(active)
    return perm


def _timed(
    solve: Callable[[], tuple[Optional[SwapCircuit], int]], repeats: int, record_timing: bool
) -> tuple[Optional[SwapCircuit], int, int]:
    """Run a repeatable solver; returns (circuit, attempts, median wall time in ns)."""
    times = []
    circuit: Optional[SwapCircuit] = None
    attempts = 0
    for _ in range(repeats if record_timing else 1):
        started = time.perf_counter_ns()
        circuit, attempts = solve()
        times.append(time.perf_counter_ns() - started)
    median = int(statistics.median(times)) if record_timing else 0
    return circuit, attempts, median


class BenchmarkRunner:
    """Runs one benchmark suite."""

    def __init__(
        self,
        config: BenchConfig,
        models: Optional[SuiteModels] = None,
        presets_file: Optional[Path] = None,
    ):
        """
        Initialize runner.

        Args:
            config: Suite definition
            models: Networks for the model methods (required when requested)
            presets_file: Topology preset file

        Raises:
            ConfigError: a model method is requested without its network
        """
        self.config = config
        self.models = models or SuiteModels()
        self.lattice = build_lattice(config.rows, config.cols)
        self.topologies = _resolve_topologies(config, self.lattice, presets_file)

        if BenchMethod.GENERIC in config.methods and self.models.generic is None:
            raise ConfigError("bench method 'generic' requested without a generic model")
        if BenchMethod.SPECIFIC in config.methods:
            missing = [t.name for t in self.topologies if t.name not in self.models.specific]
            if missing:
                raise ConfigError(f"no specific model for topologies: {', '.join(missing)}")

    def _solve(
        self, method: BenchMethod, topology: _Topology, perm: Permutation, seed: int
    ) -> tuple[Optional[SwapCircuit], int]:
        """Circuit (None on failure) and attempts/trials used for one method."""
        cfg = self.config
        mask = topology.canonical.mask
        if method is BenchMethod.GENERIC:
            assert self.models.generic is not None
            placement_rng = np.random.default_rng(seed)
            placement = topology.placements[int(placement_rng.integers(len(topology.placements)))]
            moved = transport_permutation(perm, topology.canonical, placement)
            result = synthesize(
                self.models.generic,
                moved,
                placement.mask,
                InferenceMode.SAMPLING,
                attempts=cfg.attempts,
                rng=placement_rng,
            )
            return result.circuit, result.attempts_used
        if method is BenchMethod.SPECIFIC:
            attempts = 1 if cfg.specific_mode is InferenceMode.GREEDY else cfg.attempts
            result = synthesize(
                self.models.specific[topology.name],
                perm,
                mask,
                cfg.specific_mode,
                attempts=attempts,
                rng=np.random.default_rng(seed),
            )
            return result.circuit, result.attempts_used
        if method is BenchMethod.TOKENSWAP:
            return token_swap(perm, mask, cfg.trials, np.random.default_rng(seed)), cfg.trials
        return bfs_optimal(perm, mask).circuit, 1

    def _run_instance(self, topology: _Topology, instance: int, seed: int) -> list[BenchRecord]:
        cfg = self.config
        rng = np.random.default_rng(seed)
        perm = random_instance(topology.canonical.mask, rng)
        method_seeds = dict(zip(_SEED_ORDER, (int(s) for s in rng.integers(0, 2**63 - 1, size=4))))

        records = []
        for method in cfg.methods:
            circuit, attempts, elapsed = _timed(
                lambda: self._solve(method, topology, perm, method_seeds[method]),
                cfg.timing_repeats,
                cfg.record_timing,
            )
            if circuit is not None and not verify(circuit):
                raise VerificationError(
                    f"{method.value} produced an invalid circuit on {topology.name} "
                    f"instance {instance}"
                )
            records.append(
                BenchRecord(
                    topology=topology.name,
                    instance=instance,
                    method=method,
                    gates=circuit.gate_count if circuit else 0,
                    depth=circuit.depth if circuit else 0,
                    time_ns=elapsed,
                    verified=circuit is not None,
                    attempts=attempts,
                )
            )
        return records

    def run(self) -> list[BenchRecord]:
        """
        Evaluate every (topology, instance, method) triple.

        Instance seeds are drawn per topology before any work starts, so the
        records do not depend on ``threads``; only the timings do.
        """
        cfg = self.config
        jobs: list[tuple[_Topology, int, int]] = []
        for index, topology in enumerate(self.topologies):
            topology_rng = np.random.default_rng([cfg.seed, index])
            seeds = topology_rng.integers(0, 2**63 - 1, size=cfg.instances)
            jobs.extend((topology, i, int(s)) for i, s in enumerate(seeds))

        logger.info(
            "Benchmark started",
            topologies=len(self.topologies),
            instances=cfg.instances,
            methods=[m.value for m in cfg.methods],
            threads=cfg.threads,
        )
        if cfg.threads > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as executor:
                parts = list(executor.map(lambda job: self._run_instance(*job), jobs))
        else:
            parts = [self._run_instance(*job) for job in jobs]

        records = [record for part in parts for record in part]
        failures = sum(1 for r in records if not r.verified)
        logger.info("Benchmark finished", records=len(records), failures=failures)
        return records


def run_suite(
    config: BenchConfig,
    models: Optional[SuiteModels] = None,
    presets_file: Optional[Path] = None,
) -> list[BenchRecord]:
    """Run a benchmark suite and return one record per (instance, method)."""
    return BenchmarkRunner(config, models, presets_file).run()


# ============================================
# Ratio statistics
# ============================================


def histogram_edges() -> np.ndarray:
    """Inner bin edges: 0.5, 0.55, ..., 2.0."""
    count = round((HISTOGRAM_HIGH - HISTOGRAM_LOW) / HISTOGRAM_WIDTH)
    return np.round(HISTOGRAM_LOW + HISTOGRAM_WIDTH * np.arange(count + 1), 10)


def _histogram(ratios: np.ndarray, topology: str, method: BenchMethod, metric: str) -> list[HistogramBin]:
    edges = histogram_edges()
    inner_bins = len(edges) - 1
    # rounding keeps ratios that sit on an edge in the bin starting there
    positions = np.floor(np.round((ratios - HISTOGRAM_LOW) / HISTOGRAM_WIDTH, 9)).astype(np.int64)
    below = ratios < HISTOGRAM_LOW
    above = ~below & (positions >= inner_bins)
    counts = np.bincount(positions[~below & ~above], minlength=inner_bins)

    def make(low: Optional[float], high: Optional[float], count: int) -> HistogramBin:
        return HistogramBin(
            topology=topology, method=method, metric=metric, bin_low=low, bin_high=high, count=count
        )

    bins = [make(None, HISTOGRAM_LOW, int(below.sum()))]
    bins.extend(make(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(inner_bins))
    bins.append(make(HISTOGRAM_HIGH, None, int(above.sum())))
    return bins


def _fraction(mask: np.ndarray) -> float:
    return float(mask.mean()) if mask.size else 0.0


def summarize(records: list[BenchRecord]) -> RatioSummary:
    """
    Ratio statistics of every method against the generic model.

    Per topology and method: fractions of instances with gate / depth ratio
    below 0.95 and above 1.05, the mean runtime ratio, failure counts and
    histogram data. Only instances where both the method and the generic
    model produced verified circuits are compared; instances the generic
    model solved with zero gates (identity inputs) are excluded and counted.
    Topologies without generic records produce no rows.
    """
    if not records:
        return RatioSummary()

    frame = pd.DataFrame([r.model_dump() for r in records])
    summary = RatioSummary()
    for topology in sorted(frame["topology"].unique()):
        subset = frame[frame["topology"] == topology]
        generic = subset[subset["method"] == BenchMethod.GENERIC].set_index("instance").sort_index()
        if generic.empty:
            logger.warning("No generic records, topology skipped in summary", topology=topology)
            continue

        for method in BenchMethod:
            own = subset[subset["method"] == method].set_index("instance").sort_index()
            if own.empty:
                continue
            joined = own.join(generic, rsuffix="_generic", how="inner")
            compared = joined[joined["verified"] & joined["verified_generic"]]
            identity = compared["gates_generic"] == 0
            compared = compared[~identity]

            gate_ratios = (compared["gates"] / compared["gates_generic"]).to_numpy(dtype=float)
            depth_ratios = (compared["depth"] / compared["depth_generic"]).to_numpy(dtype=float)
            timed = compared[compared["time_ns_generic"] > 0]
            mean_time = (
                float((timed["time_ns"] / timed["time_ns_generic"]).mean()) if len(timed) else None
            )
            excluded = int(identity.sum())
            if excluded:
                logger.info(
                    "Identity instances excluded from ratios",
                    topology=topology,
                    method=method.value,
                    count=excluded,
                )

            summary.rows.append(
                RatioRow(
                    topology=topology,
                    method=method,
                    frac_lt_095_gates=_fraction(gate_ratios < LOWER_THRESHOLD),
                    frac_gt_105_gates=_fraction(gate_ratios > UPPER_THRESHOLD),
                    frac_lt_095_depth=_fraction(depth_ratios < LOWER_THRESHOLD),
                    frac_gt_105_depth=_fraction(depth_ratios > UPPER_THRESHOLD),
                    mean_time_ratio=mean_time,
                    failures=int((~own["verified"]).sum()),
                    compared=len(compared),
                    excluded_identity=excluded,
                )
            )
            summary.histograms.extend(_histogram(gate_ratios, topology, method, "gates"))
            summary.histograms.extend(_histogram(depth_ratios, topology, method, "depth"))
    return summary


def export(summary: RatioSummary, records: list[BenchRecord], directory: Path) -> dict[str, Path]:
    """Write records.csv, summary.csv and histograms.csv into ``directory``."""
    from permsynth.infrastructure.files.bench_files import (
        write_histograms,
        write_records,
        write_summary,
    )

    directory = Path(directory)
    paths = {
        "records": write_records(records, directory / "records.csv"),
        "summary": write_summary(summary.rows, directory / "summary.csv"),
        "histograms": write_histograms(summary.histograms, directory / "histograms.csv"),
    }
    logger.info("Benchmark exported", directory=str(directory), records=len(records))
    return paths
