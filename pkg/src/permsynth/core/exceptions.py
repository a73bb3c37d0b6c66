"""Exception hierarchy shared by every permsynth layer.

Each exception carries the process exit code the CLI reports for it:

- 1: usage / configuration problems
- 2: validation of user input (topologies, permutations, model files)
- 3: synthesis failure
- 4: internal invariant breach
"""

from typing import Any

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_SYNTHESIS_FAILED = 3
EXIT_INTERNAL = 4


class PermSynthError(Exception):
    """Base exception for permsynth errors."""

    exit_code: int = EXIT_INTERNAL


class InvalidArgumentError(PermSynthError, ValueError):
    """An argument is outside its documented domain."""

    exit_code = EXIT_VALIDATION


class InvalidTopologyError(PermSynthError):
    """A topology mask violates the connectivity or edge invariants."""

    exit_code = EXIT_VALIDATION


class FileFormatError(PermSynthError):
    """A text file (topology, permutation, circuit, CSV) is malformed."""

    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, path: Any = None, line: int | None = None):
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line = line


class ContractViolationError(PermSynthError):
    """A caller broke a precondition that masking should make unreachable."""

    exit_code = EXIT_INTERNAL


class NoValidActionError(PermSynthError):
    """A mask exposes no active edge to choose from."""

    exit_code = EXIT_VALIDATION


class CapacityError(PermSynthError):
    """The exact oracle was asked to search a state space it refuses."""

    exit_code = EXIT_VALIDATION

    def __init__(self, active_nodes: int, limit: int):
        super().__init__(
            f"exact search supports at most {limit} active nodes, got {active_nodes}"
        )
        self.active_nodes = active_nodes
        self.limit = limit


class ModelFormatError(PermSynthError):
    """Model container could not be decoded."""

    exit_code = EXIT_VALIDATION


class ModelChecksumError(ModelFormatError):
    """Parameter block checksum does not match the stored checksum."""


class ModelVersionError(ModelFormatError):
    """Container format or encoding version is not supported."""


class ModelTruncatedError(ModelFormatError):
    """Container ends before the declared content."""


class NonFiniteLossError(PermSynthError):
    """A PPO minibatch produced a NaN or infinite loss."""

    exit_code = EXIT_INTERNAL

    def __init__(self, message: str, diagnostics: dict[str, Any]):
        super().__init__(f"{message}: {diagnostics}")
        self.diagnostics = diagnostics


class ConfigError(PermSynthError):
    """Configuration file or flag combination is invalid."""

    exit_code = EXIT_USAGE


class VerificationError(PermSynthError):
    """A circuit produced by a synthesis method failed verification."""

    exit_code = EXIT_INTERNAL
