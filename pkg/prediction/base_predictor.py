"""
Base predictor module.
Ranking, budgeted selection and critical cascade search shared by every
next-failure predictor.
"""

import logging
import math
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from cascade.anomaly_metrics import CascadeSequence
from cascade.flow_replay import FlowReplayer
from errors import UnknownInitiator
from grid.grid_case import GridCase
from grid.line_limits import LineLimits
from powerflow.topology import LineSpace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictionSet:
    """
    Ranked next-failure candidates and the budgeted selection.

    Attributes:
        ranked: (line, score) for every candidate, score descending, ties by line
        kappa: Budget in percent of lines
        selected: Lines predicted to fail next
        all_zero: True when no candidate has a nonzero score
    """

    ranked: Tuple[Tuple[int, float], ...]
    kappa: float
    selected: Tuple[int, ...]
    all_zero: bool = False

    def scores(self) -> Dict[int, float]:
        """Score per candidate line."""
        return dict(self.ranked)


@dataclass(frozen=True)
class CriticalCascades:
    """
    Outcome of a critical cascade search.

    Attributes:
        top: The d costliest candidates, cost descending
        n_candidates: Size of the explored candidate set C
        short: True when fewer than d candidates exist
        explore_seconds: Time spent generating candidates
        replay_seconds: Time spent replaying candidates through the flow model
    """

    top: Tuple[CascadeSequence, ...]
    n_candidates: int
    short: bool
    explore_seconds: float = 0.0
    replay_seconds: float = 0.0


def selection_budget(n_lines: int, kappa: float) -> int:
    """
    Number of lines a kappa-percent prediction may select.

    Raises:
        ValueError: If kappa is outside (0, 100]
    """
    if not 0 < kappa <= 100:
        raise ValueError(f"kappa must be in (0, 100], got {kappa}")
    # rounding guards against products like 20 * 35 / 100 landing just above an integer
    return math.ceil(round(n_lines * kappa / 100.0, 9))


class BasePredictor(ABC):
    """
    Abstract base class for next-failure predictors.

    Subclasses only score candidates; ranking, the kappa budget, tree
    exploration and cost-ranked identification live here.

    Attributes:
        lines: Line space every prediction is drawn from
        name: Short label used in reports
    """

    name = "base"

    def __init__(self, lines: Sequence[int]) -> None:
        """
        Initialize the base predictor.

        Args:
            lines: Line numbers that can be predicted
        """
        self.lines: Tuple[int, ...] = tuple(lines)
        # scores depend only on the failure prefix
        self._memo: Dict[Tuple[int, ...], Dict[int, float]] = {}

    @abstractmethod
    def scores(self, failed: Sequence[int]) -> Dict[int, float]:
        """
        Score every line that has not failed yet.

        Args:
            failed: Failed lines in order, most recent last

        Returns:
            Nonnegative score per candidate line

        Raises:
            UnknownInitiator: If the predictor knows nothing about the latest failure
        """

    def initiators(self) -> Tuple[int, ...]:
        """Lines a cascade search starts from."""
        return self.lines

    def predict(self, failed: Sequence[int], kappa: float) -> PredictionSet:
        """
        Rank candidates and select at most ceil(N * kappa / 100) of them.

        Only candidates with a nonzero score are selected.

        Args:
            failed: Failed lines in order, most recent last
            kappa: Budget in percent

        Returns:
            PredictionSet for the next stage
        """
        if not failed:
            raise ValueError("At least one failed line is required")
        budget = selection_budget(len(self.lines), kappa)
        key = tuple(failed)
        if key not in self._memo:
            self._memo[key] = self.scores(failed)
        ranked = tuple(sorted(self._memo[key].items(), key=lambda item: (-item[1], item[0])))
        nonzero = [line for line, score in ranked if score > 0]
        all_zero = not nonzero
        if all_zero:
            logger.debug("%s: no candidate scored after %s", self.name, list(failed))
        return PredictionSet(ranked, kappa, tuple(nonzero[:budget]), all_zero)

    def explore(self, kappa: float, horizon: int) -> List[Tuple[int, ...]]:
        """
        Generate candidate cascades by expanding predictions to the horizon.

        Every initiating line roots a tree whose children are the predicted
        next failures. A branch ends early when a prediction is empty or the
        latest failure is unknown to the predictor.

        Args:
            kappa: Budget in percent
            horizon: Maximum sequence length M

        Returns:
            Candidate sequences in lexicographic order
        """
        if horizon < 2:
            raise ValueError(f"Exploration needs a horizon of at least 2, got {horizon}")
        candidates: List[Tuple[int, ...]] = []

        # Stack of partial sequences (LIFO)
        frontier: List[Tuple[int, ...]] = [(line,) for line in reversed(self.initiators())]
        while frontier:
            path = frontier.pop()
            if len(path) == horizon:
                candidates.append(path)
                continue
            try:
                selected = self.predict(path, kappa).selected
            except UnknownInitiator:
                selected = ()
            if not selected:
                candidates.append(path)
                continue
            for line in reversed(selected):
                frontier.append(path + (line,))

        candidates.sort()
        return candidates

    def critical_cascades(self, case: GridCase, limits: LineLimits, kappa: float, horizon: int,
                          d: int, load_scale: float = 1.0,
                          replayer: Optional[FlowReplayer] = None) -> CriticalCascades:
        """
        Identify the d costliest candidate cascades.

        Each explored candidate is replayed through the AC flow to score its
        stages; a removal that islands or diverges truncates its cost.

        Args:
            case: The network at base loading
            limits: Per-line flow limits
            kappa: Budget in percent
            horizon: Maximum sequence length M
            d: Number of sequences wanted
            load_scale: System-wide demand multiplier
            replayer: Shared replayer to reuse cached flows

        Returns:
            CriticalCascades with the top d sequences
        """
        if d < 1:
            raise ValueError(f"d must be at least 1, got {d}")
        explore_start = time.perf_counter()
        candidates = self.explore(kappa, horizon)
        explore_seconds = time.perf_counter() - explore_start

        replay_start = time.perf_counter()
        if replayer is None:
            replayer = FlowReplayer(case, limits, LineSpace(self.lines, case.n_lines), "ac", load_scale)
        replayed = [replayer.replay(path) for path in candidates]
        replayed.sort(key=lambda seq: (-seq.cost, seq.lines))
        replay_seconds = time.perf_counter() - replay_start

        short = len(replayed) < d
        if short:
            logger.warning("%s: only %d candidates for d=%d at kappa=%.1f",
                           self.name, len(replayed), d, kappa)
        return CriticalCascades(tuple(replayed[:d]), len(candidates), short,
                                explore_seconds, replay_seconds)
