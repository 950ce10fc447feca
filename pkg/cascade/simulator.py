"""
Cascading failure simulation.
Enumerates dependent overload cascades (ground truth), every no-repeat
removal sequence (worst case), and samples stochastic DC cascades for
baseline training.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from cascade.anomaly_metrics import CascadeSequence, TerminalReason, anomaly_index
from cascade.flow_replay import FlowReplayer
from config import N_JOBS, PROFILE_HIGH, PROFILE_LOW
from errors import Islanded
from grid.grid_case import GridCase
from grid.line_limits import LineLimits
from powerflow.dc_solver import solve_dc
from powerflow.topology import LineSpace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroundTruthSet:
    """
    A collection of cascade sequences produced by one enumeration.

    Attributes:
        sequences: Cascade sequences in deterministic order
        horizon: Maximum sequence length M
        case_id: Name of the case the set was built on
        load_scale: System-wide demand multiplier used
        flow_model: Flow model used to score the stages ("ac" or "dc")
    """

    sequences: Tuple[CascadeSequence, ...]
    horizon: int
    case_id: str = ""
    load_scale: float = 1.0
    flow_model: str = "ac"

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self) -> Iterator[CascadeSequence]:
        return iter(self.sequences)

    def top(self, d: int) -> List[CascadeSequence]:
        """
        The d costliest sequences.

        Args:
            d: Number of sequences requested

        Returns:
            Sequences sorted by cost descending, ties by line order
        """
        ranked = sorted(self.sequences, key=lambda seq: (-seq.cost, seq.lines))
        return ranked[:d]

    def multi_stage(self) -> List[CascadeSequence]:
        """Sequences with at least one failure after the initiating one."""
        return [seq for seq in self.sequences if len(seq) >= 2]


# ============================
# Ground-truth enumeration
# ============================

def _ground_truth_subtree(case: GridCase, limits: LineLimits, lines: LineSpace, root: int,
                          horizon: int, load_scale: float) -> List[CascadeSequence]:
    """
    Depth-first expansion of every overload cascade started by one line.

    Returns:
        Root-to-leaf sequences of the subtree, lexicographically sorted
    """
    replayer = FlowReplayer(case, limits, lines, "ac", load_scale)
    leaves: List[CascadeSequence] = []

    # Stack of partial removal sequences (LIFO)
    frontier: List[Tuple[int, ...]] = [(root,)]
    while frontier:
        path = frontier.pop()
        state = replayer.outcome(path)

        # Islanding or nonconvergence ends the branch at this stage
        if isinstance(state, TerminalReason):
            leaves.append(replayer.replay(path))
            continue

        overloaded = replayer.overloaded(state, path)
        if not overloaded or len(path) == horizon:
            leaves.append(replayer.replay(path))
            continue

        # One child per overloaded line, pushed in reverse so they pop ascending
        for line in reversed(overloaded):
            frontier.append(path + (line,))

    leaves.sort(key=lambda seq: seq.lines)
    return leaves


def enumerate_ground_truth(case: GridCase, limits: LineLimits, horizon: int,
                           load_scale: float = 1.0, lines: Optional[LineSpace] = None,
                           n_jobs: int = N_JOBS) -> GroundTruthSet:
    """
    Enumerate every dependent overload cascade up to a horizon.

    Each viable line is removed in turn; after every removal the AC flow is
    re-solved and the branch splits once per overloaded line. A branch ends
    when no line is overloaded, the network islands, the flow does not
    converge, or the horizon is reached.

    Args:
        case: The network at base loading
        limits: Per-line flow limits
        horizon: Maximum sequence length M
        load_scale: System-wide demand multiplier
        lines: Initiating lines (non-islanding lines if None)
        n_jobs: Worker processes across initiating lines

    Returns:
        GroundTruthSet ordered by initiating line, then lexicographically

    Raises:
        ValueError: If horizon < 1
        BaseCaseNonConvergence: If the pre-cascade flow fails
    """
    if horizon < 1:
        raise ValueError(f"Horizon must be at least 1, got {horizon}")
    lines = lines if lines is not None else LineSpace.from_case(case)

    # Fail fast on an unsolvable base case before spawning workers
    FlowReplayer(case, limits, lines, "ac", load_scale)

    subtrees = Parallel(n_jobs=n_jobs)(
        delayed(_ground_truth_subtree)(case, limits, lines, root, horizon, load_scale)
        for root in lines
    )
    sequences = tuple(seq for subtree in subtrees for seq in subtree)
    logger.info("Ground truth for %s at load %.2f: %d sequences (M=%d)",
                case.name, load_scale, len(sequences), horizon)
    return GroundTruthSet(sequences, horizon, case.name, load_scale, "ac")


# ============================
# Worst-case enumeration
# ============================

def _worst_case_subtree(case: GridCase, limits: LineLimits, lines: LineSpace, root: int,
                        horizon: int, flow_model: str, load_scale: float) -> List[CascadeSequence]:
    replayer = FlowReplayer(case, limits, lines, flow_model, load_scale)
    complete: List[CascadeSequence] = []
    frontier: List[Tuple[int, ...]] = [(root,)]
    while frontier:
        path = frontier.pop()
        # an islanding or nonconvergent removal is the last stage
        if isinstance(replayer.outcome(path), TerminalReason) or len(path) == horizon:
            complete.append(replayer.replay(path))
            continue
        for line in reversed(lines.lines):
            if line not in path:
                frontier.append(path + (line,))
    complete.sort(key=lambda seq: seq.lines)
    return complete


def enumerate_worst_case(case: GridCase, limits: LineLimits, horizon: int,
                         lines: Optional[LineSpace] = None, flow_model: str = "ac",
                         load_scale: float = 1.0, n_jobs: int = N_JOBS) -> GroundTruthSet:
    """
    Enumerate every no-repeat sequence of viable lines up to the horizon length.

    Overload causality is ignored. Sequences run to the horizon unless a
    removal islands the network or fails to converge; that removal is then
    recorded as the last stage and the branch is not extended.

    Args:
        case: The network at base loading
        limits: Per-line flow limits
        horizon: Sequence length M
        lines: Candidate lines (non-islanding lines if None)
        flow_model: "ac" or "dc" replay
        load_scale: System-wide demand multiplier
        n_jobs: Worker processes across initiating lines

    Returns:
        GroundTruthSet of sequences with costs and terminal reasons

    Raises:
        ValueError: If horizon < 1
        BaseCaseNonConvergence: If the pre-cascade flow fails
    """
    if horizon < 1:
        raise ValueError(f"Horizon must be at least 1, got {horizon}")
    lines = lines if lines is not None else LineSpace.from_case(case)
    FlowReplayer(case, limits, lines, flow_model, load_scale)

    subtrees = Parallel(n_jobs=n_jobs)(
        delayed(_worst_case_subtree)(case, limits, lines, root, horizon, flow_model, load_scale)
        for root in lines
    )
    sequences = tuple(seq for subtree in subtrees for seq in subtree)
    logger.info("Worst-case enumeration for %s: %d sequences of length %d (%s replay)",
                case.name, len(sequences), horizon, flow_model.upper())
    return GroundTruthSet(sequences, horizon, case.name, load_scale, flow_model)


# ============================
# Stochastic DC cascades
# ============================

def overload_selection_probabilities(loading: Sequence[float]) -> np.ndarray:
    """
    Probability of each overloaded line tripping next.

    Args:
        loading: P / p_max of every overloaded line

    Returns:
        Probabilities proportional to the loading ratios
    """
    ratios = np.asarray(loading, dtype=float)
    if ratios.size == 0 or np.any(ratios < 0):
        raise ValueError("Loading ratios must be a non-empty nonnegative vector")
    return ratios / ratios.sum()


def sample_stochastic_cascades(case: GridCase, limits: LineLimits, horizon: int, count: int,
                               seed: int, lines: Optional[LineSpace] = None,
                               load_range: Tuple[float, float] = (PROFILE_LOW, PROFILE_HIGH)
                               ) -> GroundTruthSet:
    """
    Draw DC cascades where one overloaded line trips per stage.

    Every draw picks a uniform initiating line and a uniform system-wide load
    scale in load_range. When several lines are overloaded, one is chosen with
    probability proportional to P / p_max. Duplicate sequences are kept.

    Args:
        case: The network at base loading
        limits: Per-line flow limits
        horizon: Maximum sequence length M
        count: Number of cascades to draw
        seed: Random seed
        lines: Initiating lines (non-islanding lines if None)
        load_range: Bounds of the load scale draw

    Returns:
        GroundTruthSet of the draws in draw order

    Raises:
        ValueError: If count < 1 or horizon < 1
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    if horizon < 1:
        raise ValueError(f"Horizon must be at least 1, got {horizon}")
    lines = lines if lines is not None else LineSpace.from_case(case)
    rng = np.random.default_rng(seed)
    lo, hi = load_range

    sequences: List[CascadeSequence] = []
    for _ in range(count):
        root = int(rng.choice(lines.lines))
        scaled = case.scale_loads(float(rng.uniform(lo, hi)))
        previous = solve_dc(scaled)
        removed: List[int] = [root]
        anomalies = []
        reason = TerminalReason.LIMITS_OK
        while True:
            try:
                state = solve_dc(scaled, removed)
            except Islanded:
                reason = TerminalReason.ISLANDED
                break
            anomalies.append(anomaly_index(state, previous, limits, stage=len(removed), lines=lines))
            previous = state

            over = [line for line in np.flatnonzero(state.p_line >= limits.p_max) + 1
                    if line not in removed]
            if not over:
                reason = TerminalReason.LIMITS_OK
                break
            if len(removed) == horizon:
                reason = TerminalReason.HORIZON
                break
            loading = [state.p_line[line - 1] / limits.p_max[line - 1] for line in over]
            removed.append(int(rng.choice(over, p=overload_selection_probabilities(loading))))
        sequences.append(CascadeSequence.build(removed, anomalies, reason))

    multi = sum(1 for seq in sequences if len(seq) >= 2)
    logger.info("Sampled %d stochastic DC cascades (%d with dependent failures)", count, multi)
    return GroundTruthSet(tuple(sequences), horizon, case.name, 1.0, "dc")
