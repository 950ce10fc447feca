"""
Uniform random selection baseline.
"""

from typing import Dict, Sequence

import numpy as np

from prediction.base_predictor import BasePredictor, PredictionSet, selection_budget


class RandomPredictor(BasePredictor):
    """
    Selects ceil(N * kappa / 100) healthy lines uniformly at random.

    Attributes:
        rng: Seeded generator; predictions depend on call order
    """

    name = "random"

    def __init__(self, lines: Sequence[int], seed: int = 0) -> None:
        super().__init__(lines)
        self.rng = np.random.default_rng(seed)

    def scores(self, failed: Sequence[int]) -> Dict[int, float]:
        done = set(failed)
        candidates = [line for line in self.lines if line not in done]
        if not candidates:
            return {}
        return {line: 1.0 / len(candidates) for line in candidates}

    def predict(self, failed: Sequence[int], kappa: float) -> PredictionSet:
        scored = self.scores(failed)
        budget = selection_budget(len(self.lines), kappa)
        candidates = sorted(scored)
        picked = self.rng.choice(candidates, size=min(budget, len(candidates)), replace=False) \
            if candidates else np.array([], dtype=int)
        ranked = tuple(sorted(scored.items()))
        return PredictionSet(ranked, kappa, tuple(sorted(int(line) for line in picked)), not candidates)


def random_precision_expectation(n_lines: int, kappa: float, n_failed: int) -> float:
    """
    Chance that a uniform selection contains the next failure.

    Args:
        n_lines: Size of the line space N
        kappa: Budget in percent
        n_failed: Lines already failed (m)

    Returns:
        min(ceil(N * kappa / 100), N - m) / (N - m)
    """
    remaining = n_lines - n_failed
    if remaining <= 0:
        raise ValueError("No healthy line left to predict")
    return min(selection_budget(n_lines, kappa), remaining) / remaining
