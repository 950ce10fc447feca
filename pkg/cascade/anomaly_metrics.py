"""
Anomaly indices, failure states, cascade cost and evaluation metrics.

Every vector here is indexed over a LineSpace column order when one is given,
otherwise over all in-service lines.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Collection, FrozenSet, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from config import HEALTHY_TOLERANCE
from errors import DimensionMismatch, EmptyTruth, ZeroTruthCost
from grid.line_limits import LineLimits
from powerflow.flow_state import FlowState
from powerflow.topology import LineSpace

FlowLike = Union[FlowState, np.ndarray, Sequence[float]]


class TerminalReason(str, Enum):
    """Why a cascade sequence stopped."""

    LIMITS_OK = "limits_ok"
    ISLANDED = "islanded"
    HORIZON = "horizon"
    NONCONVERGENCE = "nonconvergence"


@dataclass(frozen=True, eq=False)
class AnomalyVector:
    """
    Per-line anomaly indices for one stage.

    Attributes:
        s: Normalized flow deviation per line
        stage: Stage number (1 = initiating failure)
    """

    s: np.ndarray
    stage: int

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.s)):
            raise ValueError(f"Anomaly vector at stage {self.stage} has non-finite entries")
        self.s.setflags(write=False)

    def __len__(self) -> int:
        return int(self.s.shape[0])


@dataclass(frozen=True, eq=False)
class DiscreteAnomalyState:
    """
    Discretized failure state of every line.

    Attributes:
        levels: Level label per line, 1 (healthy) .. T
        T: Number of levels
    """

    levels: np.ndarray
    T: int = 2

    def __post_init__(self) -> None:
        if self.T < 2:
            raise ValueError(f"T must be at least 2, got {self.T}")
        self.levels.setflags(write=False)

    @property
    def failed(self) -> FrozenSet[int]:
        """Columns at the top level (outage for T = 2)."""
        return frozenset(int(i) for i in np.flatnonzero(self.levels == self.T))

    @property
    def healthy(self) -> FrozenSet[int]:
        """Columns at level s_1."""
        return frozenset(int(i) for i in np.flatnonzero(self.levels == 1))


@dataclass(frozen=True)
class CascadeSequence:
    """
    One ordered cascade of single-line failures.

    Attributes:
        lines: Failed line per stage, U_1..U_M
        anomalies: Anomaly vector per recorded stage; a terminal islanding or
            nonconvergent removal has none
        terminal_reason: Why the cascade stopped
        cost: Sum of |s| over all recorded stages
    """

    lines: Tuple[int, ...]
    anomalies: Tuple[AnomalyVector, ...] = ()
    terminal_reason: TerminalReason = TerminalReason.LIMITS_OK
    cost: float = field(default=0.0)

    def __post_init__(self) -> None:
        if not self.lines:
            raise ValueError("A cascade sequence needs at least one failed line")
        if len(set(self.lines)) != len(self.lines):
            raise ValueError(f"Cascade sequence repeats a line: {self.lines}")
        if len(self.anomalies) > len(self.lines):
            raise ValueError("More anomaly vectors than stages")

    @classmethod
    def build(cls, lines: Iterable[int], anomalies: Iterable[AnomalyVector],
              terminal_reason: TerminalReason) -> "CascadeSequence":
        """Create a sequence with its cost computed from the anomalies."""
        anomalies = tuple(anomalies)
        cost = float(sum(np.sum(np.abs(a.s)) for a in anomalies))
        return cls(tuple(int(line) for line in lines), anomalies, terminal_reason, cost)

    @property
    def stages(self) -> Tuple[FrozenSet[int], ...]:
        """Failed-line singletons U_1..U_M."""
        return tuple(frozenset({line}) for line in self.lines)

    def __len__(self) -> int:
        return len(self.lines)


# ============================
# Anomaly index and discretization
# ============================

def _line_vector(values: Union[FlowLike, LineLimits], lines: Optional[LineSpace]) -> np.ndarray:
    if isinstance(values, FlowState):
        values = values.p_line
    elif isinstance(values, LineLimits):
        values = values.p_max
    vector = np.asarray(values, dtype=float)
    return lines.restrict(vector) if lines is not None else vector


def anomaly_index(p_now: FlowLike, p_prev: FlowLike, limits: LineLimits,
                  stage: int = 1, lines: Optional[LineSpace] = None) -> AnomalyVector:
    """
    Normalized flow change between two stages.

    Args:
        p_now: Flows at the current stage
        p_prev: Flows at the previous stage
        limits: Per-line flow limits
        stage: Stage number recorded on the vector
        lines: Restrict the result to these lines (full length if None)

    Returns:
        AnomalyVector with s[i] = (p_now[i] - p_prev[i]) / p_max[i]

    Raises:
        DimensionMismatch: If the three vectors cover different lines
    """
    now = np.asarray(p_now.p_line if isinstance(p_now, FlowState) else p_now, dtype=float)
    prev = np.asarray(p_prev.p_line if isinstance(p_prev, FlowState) else p_prev, dtype=float)
    if now.shape != prev.shape or now.shape != limits.p_max.shape:
        raise DimensionMismatch(
            f"Flow vectors {now.shape} / {prev.shape} do not match limits {limits.p_max.shape}"
        )
    s = (now - prev) / limits.p_max
    if lines is not None:
        s = lines.restrict(s)
    return AnomalyVector(s=s, stage=stage)


def discretize(s: AnomalyVector, flows: FlowLike, limits: LineLimits,
               removed: Collection[int] = (), T: int = 2,
               thresholds: Sequence[float] = (),
               lines: Optional[LineSpace] = None,
               healthy_tol: float = HEALTHY_TOLERANCE) -> DiscreteAnomalyState:
    """
    Map an anomaly vector to discrete failure levels.

    Overloaded or already removed lines are always at the top level T, so a
    failure persists through every later stage. For T > 2 the remaining lines
    are at level 1 when |s| <= healthy_tol, else at 2 plus the number of
    thresholds strictly below |s|.

    Args:
        s: Anomaly vector of the stage
        flows: Flows of the stage
        limits: Per-line flow limits
        removed: Line numbers already out of service
        T: Number of levels
        thresholds: T - 2 ascending thresholds on |s|
        lines: Column order of `s` (all in-service lines if None)
        healthy_tol: Healthy band on |s| for T > 2

    Returns:
        DiscreteAnomalyState with labels 1..T

    Raises:
        DimensionMismatch: If the vectors cover different lines
        ValueError: If the threshold count does not match T
    """
    if len(thresholds) != T - 2:
        raise ValueError(f"T = {T} needs {T - 2} thresholds, got {len(thresholds)}")
    if list(thresholds) != sorted(thresholds):
        raise ValueError("Thresholds must be ascending")

    p = _line_vector(flows, lines)
    p_max = _line_vector(limits, lines)
    if p.shape != s.s.shape or p_max.shape != s.s.shape:
        raise DimensionMismatch(f"Anomaly vector {s.s.shape} does not match flows {p.shape}")

    line_numbers = np.array(lines.lines if lines is not None else range(1, len(p) + 1))
    outage = (p >= p_max) | np.isin(line_numbers, list(removed))

    if T == 2:
        levels = np.where(outage, 2, 1)
    else:
        magnitude = np.abs(s.s)
        graded = 2 + np.searchsorted(np.asarray(thresholds, dtype=float), magnitude, side="left")
        levels = np.where(magnitude <= healthy_tol, 1, np.minimum(graded, T))
        levels = np.where(outage, T, levels)
    return DiscreteAnomalyState(levels=levels.astype(int), T=T)


def failure_onsets(previous: DiscreteAnomalyState, current: DiscreteAnomalyState) -> FrozenSet[int]:
    """Columns that are not healthy now but were healthy at the previous stage."""
    if previous.levels.shape != current.levels.shape:
        raise DimensionMismatch("Failure states cover different lines")
    unhealthy = frozenset(range(len(current.levels))) - current.healthy
    return unhealthy & previous.healthy


# ============================
# Cost and evaluation metrics
# ============================

def cascade_cost(seq: CascadeSequence) -> float:
    """Sum of |s_i| over every line and recorded stage."""
    return float(sum(np.sum(np.abs(a.s)) for a in seq.anomalies))


def precision(predictions: Sequence[Collection[int]], truth: CascadeSequence) -> float:
    """
    Fraction of realized stages 2..M whose failed line was predicted.

    Args:
        predictions: Predicted sets aligned with truth stages 2, 3, ...
        truth: Realized cascade

    Returns:
        Hit rate averaged over the realized stages after the first

    Raises:
        EmptyTruth: If the truth has no stage after the initiating failure
        DimensionMismatch: If fewer predicted sets than realized stages are given
    """
    realized = truth.lines[1:]
    if not realized:
        raise EmptyTruth(f"Truth sequence {truth.lines} has a single stage")
    if len(predictions) < len(realized):
        raise DimensionMismatch(
            f"{len(predictions)} predicted sets for {len(realized)} realized stages"
        )
    hits = sum(1 for line, predicted in zip(realized, predictions) if line in predicted)
    return hits / len(realized)


def regret(predicted: Sequence[Union[CascadeSequence, float]],
           truth_top: Sequence[Union[CascadeSequence, float]]) -> float:
    """
    Relative cost shortfall of predicted sequences against the true costliest ones.

    Args:
        predicted: Predicted sequences or their costs
        truth_top: The true d costliest sequences or their costs

    Returns:
        1 - sum(predicted costs) / sum(truth costs)

    Raises:
        ZeroTruthCost: If the truth costs sum to zero
    """
    def total(items: Sequence[Union[CascadeSequence, float]]) -> float:
        return float(sum(item.cost if isinstance(item, CascadeSequence) else item for item in items))

    reference = total(truth_top)
    if reference <= 0:
        raise ZeroTruthCost("Reference sequences have zero total cost")
    return 1.0 - total(predicted) / reference
