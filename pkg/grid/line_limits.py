"""
Per-line active flow limits.

Public case files often leave RATE_A at zero, so unrated lines get a limit
scaled from their converged base-case flow.
"""

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from config import LIMIT_ALPHA, LIMIT_FLOOR_MW
from errors import NonConvergedBase
from grid.grid_case import GridCase
from powerflow.flow_state import FlowState

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LineLimits:
    """
    Maximum active flow per in-service line.

    Attributes:
        p_max: Limits in MW, indexed by line number - 1
    """

    p_max: np.ndarray

    def __post_init__(self) -> None:
        if np.any(~np.isfinite(self.p_max)) or np.any(self.p_max <= 0):
            raise ValueError("Line limits must be finite and strictly positive")
        self.p_max.setflags(write=False)

    def __len__(self) -> int:
        return int(self.p_max.shape[0])

    def scaled(self, factor: float) -> "LineLimits":
        """Return limits multiplied by a positive factor."""
        if factor <= 0:
            raise ValueError("Limit scale factor must be positive")
        return LineLimits(self.p_max * factor)


def assign_limits(case: GridCase, base_flows: Union[FlowState, np.ndarray],
                  alpha: float = LIMIT_ALPHA, floor: float = LIMIT_FLOOR_MW) -> LineLimits:
    """
    Assign a flow limit to every in-service line.

    Rated lines keep RATE_A. Unrated lines get alpha * |base flow|, floored
    so lightly loaded lines never end up with a zero limit.

    Args:
        case: The network
        base_flows: Converged base-case flows (FlowState or MW vector)
        alpha: Scale on the base flow, must exceed 1
        floor: Smallest assigned limit (MW), must be positive

    Returns:
        LineLimits covering every in-service line

    Raises:
        NonConvergedBase: If the base flow did not converge or has non-finite entries
        ValueError: If alpha or floor is out of range, or lengths disagree
    """
    if alpha <= 1:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    if floor <= 0:
        raise ValueError(f"floor must be positive, got {floor}")

    if isinstance(base_flows, FlowState):
        if not base_flows.converged:
            raise NonConvergedBase("Base-case power flow did not converge")
        flows = np.asarray(base_flows.p_line, dtype=float)
    else:
        flows = np.asarray(base_flows, dtype=float)
    if flows.shape != (case.n_lines,):
        raise ValueError(f"Expected {case.n_lines} base flows, got shape {flows.shape}")
    if not np.all(np.isfinite(flows)):
        raise NonConvergedBase("Base-case flows contain non-finite values")

    rates = np.array([branch.rate_a for branch in case.branches], dtype=float)
    scaled = np.maximum(alpha * np.abs(flows), floor)
    p_max = np.where(rates > 0, rates, scaled)
    logger.debug("Assigned limits: %d rated, %d scaled (alpha=%.3f)",
                 int(np.sum(rates > 0)), int(np.sum(rates <= 0)), alpha)
    return LineLimits(p_max)
