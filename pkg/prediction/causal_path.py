"""
Causal path prediction.
Intervenes on the learned interaction matrix of the latest failure and ranks
lines by the summed edge-coefficient products of the directed paths reaching them.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from config import MAX_PATH_LENGTH
from errors import UnknownInitiator
from grid.grid_case import GridCase
from grid.line_limits import LineLimits
from learning.causal_learn import CausalModelSet
from prediction.base_predictor import BasePredictor, CriticalCascades, PredictionSet


@dataclass(frozen=True, eq=False)
class InterventionState:
    """
    Interaction matrix updated for an ongoing cascade.

    Attributes:
        failed: Failed lines in order, N_m
        b: Matrix of the latest failure with the rows of earlier failures zeroed
        lines: Line numbers of the rows/columns
    """

    failed: Tuple[int, ...]
    b: np.ndarray
    lines: Tuple[int, ...]

    def __post_init__(self) -> None:
        self.b.setflags(write=False)


@dataclass(frozen=True)
class CausalEffects:
    """
    Normalized total causal effect of the latest failure on each healthy line.

    Attributes:
        scores: D(j) per healthy line; sums to 1 unless all_zero
        all_zero: True when no directed path leaves the latest failure
    """

    scores: Dict[int, float]
    all_zero: bool


class CausalPathPredictor(BasePredictor):
    """
    Next-failure predictor driven by learned causal models.

    Attributes:
        models: One learned model per initiating line
        max_path_len: Longest directed path counted
    """

    name = "causal"

    def __init__(self, models: CausalModelSet, max_path_len: int = MAX_PATH_LENGTH) -> None:
        """
        Args:
            models: Learned models sharing one line space
            max_path_len: Longest directed path counted (>= 1)
        """
        if max_path_len < 1:
            raise ValueError(f"max_path_len must be at least 1, got {max_path_len}")
        super().__init__(models.lines)
        self.models = models
        self.max_path_len = max_path_len
        self._position = {line: col for col, line in enumerate(models.lines)}

    def initiators(self) -> Tuple[int, ...]:
        return tuple(line for line in self.lines if line in self.models)

    def intervene(self, failed: Sequence[int]) -> InterventionState:
        """
        Apply the outages so far to the latest failure's matrix.

        Rows of every earlier failure are zeroed: a failed line no longer
        responds to its parents. Other rows keep the latest model's values.

        Raises:
            ValueError: If failed is empty
            UnknownInitiator: If no model exists for the latest failure
        """
        if not failed:
            raise ValueError("Intervention needs at least one failed line")
        latest = failed[-1]
        if latest not in self.models:
            raise UnknownInitiator(f"No causal model for line {latest}")
        b = np.array(self.models[latest].b, dtype=float)
        earlier = [self._position[line] for line in failed[:-1] if line in self._position]
        b[earlier, :] = 0.0
        return InterventionState(tuple(failed), b, self.lines)

    def total_causal_effects(self, state: InterventionState) -> CausalEffects:
        """
        Sum the effects of the latest failure along every short directed path.

        Each simple path from the latest failure to a healthy line, up to
        max_path_len edges, contributes the product of its edge coefficients.
        Raw scores are |sum of products| and are normalized to sum to 1.

        Args:
            state: Intervened matrix

        Returns:
            CausalEffects over the lines that have not failed
        """
        return total_causal_effects(state, self.max_path_len)

    def scores(self, failed: Sequence[int]) -> Dict[int, float]:
        return self.total_causal_effects(self.intervene(failed)).scores


def path_effect_sums(b: np.ndarray, source: int, max_path_len: int) -> np.ndarray:
    """
    Signed sum of edge-coefficient products over simple paths from a source.

    An edge j -> i exists wherever b[i, j] != 0.

    Args:
        b: Interaction matrix
        source: Column of the path origin
        max_path_len: Longest path in edges

    Returns:
        Sum of path products per target column (the source entry stays 0)
    """
    n = b.shape[0]
    children: List[np.ndarray] = [np.flatnonzero(b[:, j]) for j in range(n)]
    sums = np.zeros(n)

    # Stack of (node, product so far, nodes on the path)
    frontier: List[Tuple[int, float, Tuple[int, ...]]] = [(source, 1.0, (source,))]
    while frontier:
        node, product, path = frontier.pop()
        for child in children[node]:
            if child in path:
                continue
            weight = product * b[child, node]
            sums[child] += weight
            if len(path) < max_path_len:
                frontier.append((child, weight, path + (child,)))
    return sums


# ============================
# Module-level operations
# ============================

def intervene(models: CausalModelSet, failed: Sequence[int]) -> InterventionState:
    """Intervened matrix for a failure sequence."""
    return CausalPathPredictor(models).intervene(failed)


def total_causal_effects(state: InterventionState,
                         max_path_len: int = MAX_PATH_LENGTH) -> CausalEffects:
    """
    Normalized total causal effects of the latest failure in state.

    Raw scores are |sum of path products| over the lines that have not
    failed; they are divided by their total, or flagged all-zero when no
    path leaves the latest failure.
    """
    source = state.lines.index(state.failed[-1])
    raw = path_effect_sums(state.b, source, max_path_len)
    failed = set(state.failed)
    magnitude = {line: abs(float(raw[col])) for col, line in enumerate(state.lines) if line not in failed}
    total = sum(magnitude.values())
    if total == 0:
        return CausalEffects({line: 0.0 for line in magnitude}, True)
    return CausalEffects({line: value / total for line, value in magnitude.items()}, False)


def c_path(models: CausalModelSet, failed: Sequence[int], kappa: float,
           max_path_len: int = MAX_PATH_LENGTH) -> PredictionSet:
    """Predicted next failures after a failure sequence."""
    return CausalPathPredictor(models, max_path_len).predict(failed, kappa)


def cci_explore(models: CausalModelSet, kappa: float, horizon: int,
                max_path_len: int = MAX_PATH_LENGTH) -> List[Tuple[int, ...]]:
    """Candidate critical cascades generated from the causal models."""
    return CausalPathPredictor(models, max_path_len).explore(kappa, horizon)


def cci(models: CausalModelSet, case: GridCase, limits: LineLimits, kappa: float, horizon: int,
        d: int, max_path_len: int = MAX_PATH_LENGTH, load_scale: float = 1.0) -> CriticalCascades:
    """The d costliest candidate cascades generated from the causal models."""
    predictor = CausalPathPredictor(models, max_path_len)
    return predictor.critical_cascades(case, limits, kappa, horizon, d, load_scale)
