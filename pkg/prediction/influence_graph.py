"""
Influence graph baseline.
A one-step Markov model of stage-to-stage outages learned by counting
parent -> child transitions in training cascades.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from cascade.anomaly_metrics import CascadeSequence
from grid.grid_case import GridCase
from grid.line_limits import LineLimits
from prediction.base_predictor import BasePredictor, CriticalCascades, PredictionSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class InfluenceGraph:
    """
    Transition counts between consecutive failures.

    Attributes:
        counts: counts[i, j] = times line j failed right after line i (column order of `lines`)
        lines: Line numbers of the rows/columns
    """

    counts: np.ndarray
    lines: Tuple[int, ...]

    def __post_init__(self) -> None:
        n = len(self.lines)
        if self.counts.shape != (n, n):
            raise ValueError(f"Counts of shape {self.counts.shape} do not match {n} lines")
        if np.any(self.counts < 0):
            raise ValueError("Transition counts must be nonnegative")
        self.counts.setflags(write=False)

    @property
    def probs(self) -> np.ndarray:
        """Row-normalized transition probabilities; rows without data stay zero."""
        totals = self.counts.sum(axis=1, keepdims=True).astype(float)
        return np.divide(self.counts, totals, out=np.zeros(self.counts.shape), where=totals > 0)

    def position(self, line: int) -> int:
        return self.lines.index(line)


def train_ig(sequences: Iterable[CascadeSequence], lines: Sequence[int]) -> InfluenceGraph:
    """
    Count parent -> child transitions over training cascades.

    Transitions touching a line outside `lines` are skipped.

    Args:
        sequences: Training cascades
        lines: Line space of the graph

    Returns:
        InfluenceGraph of raw counts

    Raises:
        ValueError: If no sequence is given
    """
    lines = tuple(lines)
    position = {line: col for col, line in enumerate(lines)}
    counts = np.zeros((len(lines), len(lines)), dtype=np.int64)
    n_sequences = 0
    for seq in sequences:
        n_sequences += 1
        for parent, child in zip(seq.lines, seq.lines[1:]):
            if parent in position and child in position:
                counts[position[parent], position[child]] += 1
    if n_sequences == 0:
        raise ValueError("Influence graph training needs at least one sequence")
    logger.info("Trained influence graph on %d sequences (%d transitions)",
                n_sequences, int(counts.sum()))
    return InfluenceGraph(counts, lines)


class InfluenceGraphPredictor(BasePredictor):
    """
    Next-failure predictor reading the influence graph row of the latest failure.

    Attributes:
        graph: Trained influence graph
    """

    name = "influence_graph"

    def __init__(self, graph: InfluenceGraph) -> None:
        super().__init__(graph.lines)
        self.graph = graph
        self._probs = graph.probs

    def scores(self, failed: Sequence[int]) -> Dict[int, float]:
        """
        Renormalized transition probabilities from the latest failure.

        Transitions into earlier failures are zeroed before renormalizing.
        A latest failure outside the graph scores every candidate zero.
        """
        done = set(failed)
        candidates = [line for line in self.lines if line not in done]
        latest = failed[-1]
        if latest not in self.lines:
            return {line: 0.0 for line in candidates}

        row = self._probs[self.graph.position(latest)].copy()
        for line in failed[:-1]:
            if line in self.lines:
                row[self.graph.position(line)] = 0.0
        total = row.sum()
        if total > 0:
            row = row / total
        return {line: float(row[self.graph.position(line)]) for line in candidates}


def ig_predict(graph: InfluenceGraph, failed: Sequence[int], kappa: float) -> PredictionSet:
    """Predicted next failures from the influence graph."""
    return InfluenceGraphPredictor(graph).predict(failed, kappa)


def ig_explore(graph: InfluenceGraph, kappa: float, horizon: int) -> List[Tuple[int, ...]]:
    """Candidate critical cascades generated from the influence graph."""
    return InfluenceGraphPredictor(graph).explore(kappa, horizon)


def ig_cci(graph: InfluenceGraph, case: GridCase, limits: LineLimits, kappa: float, horizon: int,
           d: int, load_scale: float = 1.0) -> CriticalCascades:
    """The d costliest candidate cascades generated from the influence graph."""
    return InfluenceGraphPredictor(graph).critical_cascades(case, limits, kappa, horizon, d, load_scale)
