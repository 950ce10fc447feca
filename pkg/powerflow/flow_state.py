"""
Power flow results.
"""

from dataclasses import dataclass, field
from typing import FrozenSet, Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class FlowState:
    """
    Solved operating point of the network.

    Attributes:
        p_line: Absolute active flow per in-service line (MW), 0 for removed lines
        converged: Whether the solver met its tolerance
        iterations: Solver iterations used (0 for the linear DC solve)
        max_mismatch: Largest absolute bus power mismatch at exit (per unit)
        removed: Line numbers that were out of service for this solve
        voltages: Complex bus voltages (unit magnitude for DC), AC ones usable as a warm start
    """

    p_line: np.ndarray
    converged: bool
    iterations: int
    max_mismatch: float = 0.0
    removed: FrozenSet[int] = field(default_factory=frozenset)
    voltages: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        # read-only so shared states cannot be mutated by consumers
        self.p_line.setflags(write=False)

    @property
    def n_lines(self) -> int:
        """Number of lines covered."""
        return int(self.p_line.shape[0])
