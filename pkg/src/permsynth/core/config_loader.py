"""YAML configuration loaders: topology presets, training and benchmark configs."""

from pathlib import Path
from typing import Any, Optional

import yaml
from pydantic import ValidationError

from permsynth.core.config import get_settings
from permsynth.core.exceptions import ConfigError
from permsynth.domain.entities.benchmark import BenchConfig
from permsynth.domain.entities.lattice import TopologyPreset
from permsynth.domain.entities.training import TrainConfig

SUPPORTED_TOPOLOGIES_VERSION = 1


def _read_yaml(path: Path) -> dict[str, Any]:
    """Read a YAML mapping, raising ConfigError with the path on failure."""
    if not path.exists():
        raise ConfigError(f"Configuration file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping at top level")
    return data


class TopologyCatalog:
    """Load and provide access to the named topology presets."""

    def __init__(self, config_path: Optional[Path] = None):
        """
        Initialize catalog.

        Args:
            config_path: Path to presets file. If None, uses the settings default.
        """
        self.config_path = Path(config_path or get_settings().topologies_file)
        self._presets: dict[str, TopologyPreset] = {}
        self._load_config()

    def _load_config(self) -> None:
        """Load presets from the YAML file."""
        data = _read_yaml(self.config_path)
        version = data.get("version", SUPPORTED_TOPOLOGIES_VERSION)
        if version != SUPPORTED_TOPOLOGIES_VERSION:
            raise ConfigError(f"{self.config_path}: unsupported presets version {version}")

        presets: dict[str, TopologyPreset] = {}
        for name, entry in (data.get("presets") or {}).items():
            entry = entry or {}
            edges = entry.get("edges") or []
            try:
                presets[str(name)] = TopologyPreset(
                    name=str(name),
                    node_coords=tuple(tuple(c) for c in entry.get("nodes", [])),
                    edge_rule="explicit" if edges else "induced",
                    edges=tuple((tuple(a), tuple(b)) for a, b in edges),
                    description=entry.get("description", ""),
                )
            except (ValidationError, TypeError, ValueError) as e:
                raise ConfigError(f"{self.config_path}: invalid preset {name}: {e}") from e
        self._presets = presets

    def reload(self) -> None:
        """Reload presets from file."""
        self._load_config()

    def names(self) -> list[str]:
        """Preset names in file order."""
        return list(self._presets)

    def get(self, name: str) -> TopologyPreset:
        """
        Get a preset by name.

        Raises:
            ConfigError: if the preset is not defined
        """
        try:
            return self._presets[name]
        except KeyError:
            known = ", ".join(self._presets) or "none"
            raise ConfigError(f"Unknown topology preset {name!r} (known: {known})") from None

    def __contains__(self, name: object) -> bool:
        return name in self._presets


# Singleton instance
_catalog_instance: Optional[TopologyCatalog] = None


def get_topology_catalog(config_path: Optional[Path] = None) -> TopologyCatalog:
    """
    Get the topology catalog.

    A path different from the cached catalog's path loads a fresh catalog.
    """
    global _catalog_instance

    if config_path is not None:
        path = Path(config_path)
        if _catalog_instance is None or _catalog_instance.config_path != path:
            _catalog_instance = TopologyCatalog(path)
        return _catalog_instance

    if _catalog_instance is None:
        _catalog_instance = TopologyCatalog()

    return _catalog_instance


# ============================================
# Training configuration
# ============================================

# section -> {yaml key: TrainConfig field}
_TRAIN_SECTIONS: dict[str, dict[str, str]] = {
    "lattice": {"rows": "rows", "cols": "cols"},
    "network": {"hidden_sizes": "hidden_sizes"},
    "curriculum": {
        "success_threshold": "success_threshold",
        "initial_difficulty": "initial_difficulty",
        "max_steps_factor": "max_steps_factor",
        "max_steps_slack": "max_steps_slack",
    },
    "ppo": {
        "batch_episodes": "batch_episodes",
        "ppo_epochs": "ppo_epochs",
        "minibatch_size": "minibatch_size",
        "clip_epsilon": "clip_epsilon",
        "gamma": "gamma",
        "gae_lambda": "gae_lambda",
        "value_coef": "value_coef",
        "entropy_coef": "entropy_coef",
        "learning_rate": "learning_rate",
        "max_grad_norm": "max_grad_norm",
        "bootstrap_truncated": "bootstrap_truncated",
    },
    "topology": {
        "regime": "topology_regime",
        "size_range": "size_range",
        "fixed_topology": "fixed_topology",
        "forced_topologies": "forced_topologies",
        "force_prob": "force_prob",
    },
    "run": {
        "max_iterations": "max_iterations",
        "seed": "seed",
        "threads": "threads",
        "checkpoint_every": "checkpoint_every",
        "eval_every": "eval_every",
        "eval_episodes": "eval_episodes",
    },
}


def _flatten_train_yaml(data: dict[str, Any], path: Path) -> dict[str, Any]:
    """Map the sectioned YAML layout onto TrainConfig field names."""
    flat: dict[str, Any] = {}
    for section, entries in data.items():
        if section == "rewards":
            flat["rewards"] = entries or {}
            continue
        mapping = _TRAIN_SECTIONS.get(section)
        if mapping is None:
            raise ConfigError(f"{path}: unknown section {section!r}")
        for key, value in (entries or {}).items():
            if key not in mapping:
                raise ConfigError(f"{path}: unknown key {section}.{key}")
            flat[mapping[key]] = value
    return flat


def load_train_config(
    config_path: Optional[Path] = None, overrides: Optional[dict[str, Any]] = None
) -> TrainConfig:
    """
    Load a training configuration.

    Args:
        config_path: YAML file; None means built-in defaults only.
        overrides: TrainConfig field values that win over the file (CLI flags).

    Returns:
        Validated TrainConfig

    Raises:
        ConfigError: on unreadable files or invalid values
    """
    values: dict[str, Any] = {}
    if config_path is not None:
        path = Path(config_path)
        values = _flatten_train_yaml(_read_yaml(path), path)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    try:
        return TrainConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"Invalid training configuration: {e}") from e


# ============================================
# Benchmark configuration
# ============================================


def load_bench_config(
    config_path: Optional[Path] = None, overrides: Optional[dict[str, Any]] = None
) -> BenchConfig:
    """Load a benchmark suite configuration (YAML layout of config/bench.yaml)."""
    values: dict[str, Any] = {}
    if config_path is not None:
        data = _read_yaml(Path(config_path))
        lattice = data.get("lattice") or {}
        models = data.get("models") or {}
        inference = data.get("inference") or {}
        timing = data.get("timing") or {}
        values = {
            "rows": lattice.get("rows"),
            "cols": lattice.get("cols"),
            "topologies": data.get("topologies"),
            "instances": data.get("instances"),
            "methods": data.get("methods"),
            "generic_model": models.get("generic"),
            "specific_models": models.get("specific"),
            "attempts": inference.get("attempts"),
            "specific_mode": inference.get("specific_mode"),
            "trials": inference.get("trials"),
            "record_timing": timing.get("record_timing"),
            "timing_repeats": timing.get("repeats"),
            "seed": data.get("seed"),
            "threads": data.get("threads"),
        }
        values = {k: v for k, v in values.items() if v is not None}
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    try:
        return BenchConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"Invalid benchmark configuration: {e}") from e
