"""
Cascade flow replay.
Solves the network after any set of line removals, caching one outcome per
removed set, and turns ordered removals into scored cascade sequences.
"""

import logging
from typing import Dict, FrozenSet, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from cascade.anomaly_metrics import CascadeSequence, TerminalReason, anomaly_index
from errors import BaseCaseNonConvergence, Islanded, NonConvergence
from grid.grid_case import GridCase
from grid.line_limits import LineLimits
from powerflow.ac_solver import solve_ac
from powerflow.dc_solver import solve_dc
from powerflow.flow_state import FlowState
from powerflow.topology import LineSpace

logger = logging.getLogger(__name__)

FLOW_MODELS = ("ac", "dc")

Outcome = Union[FlowState, TerminalReason]


class FlowReplayer:
    """
    Replays removal sequences on one loading of a case.

    The flow after a set of removals does not depend on removal order, so
    every distinct removed set is solved once. AC solves warm start from the
    pre-cascade voltages.

    Attributes:
        case: The network at the replayed loading
        limits: Per-line flow limits
        lines: Line space the anomaly vectors are indexed over
        flow_model: "ac" or "dc"
        base: Pre-cascade flow state P[0]
    """

    def __init__(self, case: GridCase, limits: LineLimits, lines: Optional[LineSpace] = None,
                 flow_model: str = "ac", load_scale: float = 1.0) -> None:
        """
        Solve the pre-cascade state.

        Args:
            case: The network at base loading
            limits: Per-line flow limits
            lines: Line space for anomaly vectors (non-islanding lines if None)
            flow_model: "ac" or "dc"
            load_scale: System-wide demand multiplier

        Raises:
            ValueError: If the flow model is unknown or limits do not cover the case
            BaseCaseNonConvergence: If the pre-cascade flow cannot be solved
        """
        if flow_model not in FLOW_MODELS:
            raise ValueError(f"Unknown flow model '{flow_model}', expected one of {FLOW_MODELS}")
        if len(limits) != case.n_lines:
            raise ValueError(f"Limits cover {len(limits)} lines, case has {case.n_lines}")

        self.case = case.scale_loads(load_scale) if load_scale != 1.0 else case
        self.limits = limits
        self.lines = lines if lines is not None else LineSpace.from_case(case)
        self.flow_model = flow_model
        self._cache: Dict[FrozenSet[int], Outcome] = {}

        try:
            self.base = self._solve(frozenset(), None)
        except (NonConvergence, Islanded) as e:
            raise BaseCaseNonConvergence(
                f"Pre-cascade {flow_model.upper()} flow at load scale {load_scale} failed: {e}"
            )
        self._cache[frozenset()] = self.base

    def _solve(self, removed: FrozenSet[int], warm_start: Optional[np.ndarray]) -> FlowState:
        if self.flow_model == "dc":
            return solve_dc(self.case, removed)
        return solve_ac(self.case, removed, warm_start=warm_start)

    def outcome(self, removed: Iterable[int]) -> Outcome:
        """
        Flow state after removing lines, or the reason it cannot be solved.

        Args:
            removed: Line numbers out of service

        Returns:
            FlowState, or TerminalReason.ISLANDED / NONCONVERGENCE
        """
        key = frozenset(removed)
        if key not in self._cache:
            try:
                self._cache[key] = self._solve(key, self.base.voltages)
            except Islanded:
                self._cache[key] = TerminalReason.ISLANDED
            except NonConvergence:
                logger.debug("Nonconvergent removal set %s", sorted(key))
                self._cache[key] = TerminalReason.NONCONVERGENCE
        return self._cache[key]

    def overloaded(self, state: FlowState, removed: Iterable[int]) -> Tuple[int, ...]:
        """
        In-service lines at or above their limit.

        Args:
            state: Flow state to check
            removed: Lines already out of service

        Returns:
            Ascending line numbers with P >= p_max
        """
        gone = set(removed)
        over = np.flatnonzero(state.p_line >= self.limits.p_max) + 1
        return tuple(int(line) for line in over if line not in gone)

    def replay(self, lines: Sequence[int]) -> CascadeSequence:
        """
        Score an ordered removal sequence.

        Stage m's anomaly vector compares the flow after m removals with the
        flow after m - 1. A removal that islands or fails to converge ends the
        sequence as its last stage, with no anomaly vector.

        Args:
            lines: Ordered line numbers, no repeats

        Returns:
            CascadeSequence with per-stage anomalies, cost and terminal reason
        """
        anomalies = []
        previous = self.base
        realized = []
        reason = None
        for stage, line in enumerate(lines, start=1):
            realized.append(int(line))
            state = self.outcome(realized)
            if isinstance(state, TerminalReason):
                reason = state
                break
            anomalies.append(anomaly_index(state, previous, self.limits, stage=stage, lines=self.lines))
            previous = state
        if reason is None:
            reason = (TerminalReason.HORIZON if self.overloaded(previous, realized)
                      else TerminalReason.LIMITS_OK)
        return CascadeSequence.build(realized, anomalies, reason)

    @property
    def cache_size(self) -> int:
        """Number of distinct removal sets solved so far."""
        return len(self._cache)
