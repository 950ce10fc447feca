"""
Error types raised across the toolkit.

Two families: ValidationError for bad inputs (the CLI exits with 1) and
ComputeError for numerical failures (the CLI exits with 2).
"""

from typing import Dict, Optional, Any


class GridCausalError(Exception):
    """Base class for every toolkit error."""


class ValidationError(GridCausalError, ValueError):
    """Input, configuration or artifact problem detected before or during compute."""


class ComputeError(GridCausalError, RuntimeError):
    """A numerical stage failed on valid input."""


# ============================
# Grid case input
# ============================

class MalformedCase(ValidationError):
    """Case text cannot be parsed or violates a structural invariant."""


class DanglingReference(ValidationError):
    """A branch or generator references a bus that does not exist."""


class NoSlackBus(ValidationError):
    """The case has no reference bus."""


# ============================
# Metrics and prediction input
# ============================

class DimensionMismatch(ValidationError):
    """Two vectors that must cover the same lines do not."""


class EmptyTruth(ValidationError):
    """A truth sequence has no stage after the initiating failure."""


class ZeroTruthCost(ValidationError):
    """The reference sequences carry zero total cost, so regret is undefined."""


class UnknownInitiator(ValidationError):
    """No causal model exists for the most recent failure."""


class ConfigError(ValidationError):
    """A run configuration value is missing or out of range."""


class MissingArtifact(ValidationError):
    """A persisted artifact needed by a command does not exist."""

    def __init__(self, path: str, producer: str) -> None:
        super().__init__(f"Missing artifact {path}; run the '{producer}' command first")
        self.path = path
        self.producer = producer


class CorruptArtifact(ValidationError):
    """A persisted artifact cannot be read back or fails its digest check."""


# ============================
# Numerical failures
# ============================

class NonConvergedBase(ComputeError):
    """Limits were requested from a base flow that did not converge."""


class Islanded(ComputeError):
    """The surviving network is disconnected."""


class NonConvergence(ComputeError):
    """An iterative solver hit its iteration cap."""


class BaseCaseNonConvergence(ComputeError):
    """The pre-cascade AC flow does not converge at the requested loading."""


class TooFewValidRows(ComputeError):
    """Too many profile steps failed to solve for a dataset to be learnable."""


class SingularData(ComputeError):
    """The dataset covariance is rank deficient."""


class ZeroDiagonal(ComputeError):
    """A permuted unmixing row has a zero diagonal entry."""


class PartialFailure(ComputeError):
    """
    Some items of a per-line batch failed.

    Attributes:
        result: Whatever the batch produced for the lines that succeeded
        failures: Mapping of line number to the error message
    """

    def __init__(self, failures: Dict[int, str], result: Optional[Any] = None) -> None:
        lines = ", ".join(str(k) for k in sorted(failures))
        super().__init__(f"{len(failures)} line(s) failed: {lines}")
        self.failures = dict(failures)
        self.result = result
