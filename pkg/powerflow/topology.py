"""
Network topology checks.
Islanding detection and the space of viable initiating lines.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from errors import DimensionMismatch
from grid.grid_case import GridCase
from powerflow.network_matrices import live_offsets


def is_islanding(case: GridCase, removed_lines: Iterable[int]) -> bool:
    """
    Check whether removing lines disconnects the bus graph.

    Args:
        case: The network
        removed_lines: 1-based line numbers taken out of service

    Returns:
        True iff the surviving graph has more than one component
    """
    live = live_offsets(case, removed_lines)
    n_bus = len(case.buses)
    if len(live) == 0:
        return n_bus > 1
    pos = case.bus_position
    f = [pos[case.branches[k].from_bus] for k in live]
    t = [pos[case.branches[k].to_bus] for k in live]
    adjacency = csr_matrix((np.ones(len(live)), (f, t)), shape=(n_bus, n_bus))
    n_components, _ = connected_components(adjacency, directed=False)
    return n_components > 1


def non_islanding_lines(case: GridCase) -> Tuple[int, ...]:
    """
    Lines whose single outage leaves the network connected.

    Args:
        case: The network

    Returns:
        Ascending line numbers
    """
    return tuple(line for line in range(1, case.n_lines + 1) if not is_islanding(case, {line}))


@dataclass(frozen=True)
class LineSpace:
    """
    Ordered set of viable lines every model and prediction is indexed over.

    Attributes:
        lines: Ascending line numbers (1-based, over all in-service branches)
        n_total: Number of in-service branches in the case
    """

    lines: Tuple[int, ...]
    n_total: int

    @classmethod
    def from_case(cls, case: GridCase) -> "LineSpace":
        """Build the space of non-islanding lines of a case."""
        return cls(non_islanding_lines(case), case.n_lines)

    def __len__(self) -> int:
        return len(self.lines)

    def __iter__(self):
        return iter(self.lines)

    def __contains__(self, line: object) -> bool:
        return line in self.position

    @cached_property
    def position(self) -> Dict[int, int]:
        """Map from line number to its column in the space."""
        return {line: col for col, line in enumerate(self.lines)}

    @cached_property
    def offsets(self) -> np.ndarray:
        """0-based offsets of the lines into a full-length flow vector."""
        return np.array([line - 1 for line in self.lines], dtype=int)

    def restrict(self, values: Sequence[float]) -> np.ndarray:
        """
        Select the viable lines from a vector over all in-service lines.

        Raises:
            DimensionMismatch: If the vector does not cover every in-service line
        """
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_total,):
            raise DimensionMismatch(
                f"Expected a vector over {self.n_total} lines, got shape {values.shape}"
            )
        return values[self.offsets]

    def columns(self, lines: Iterable[int]) -> FrozenSet[int]:
        """Columns of the given lines, skipping lines outside the space."""
        return frozenset(self.position[line] for line in lines if line in self.position)
