"""
DC power flow.
Linear B-theta approximation used for the stochastic training cascades.
"""

from typing import Iterable

import numpy as np
from scipy.sparse.linalg import spsolve

from errors import Islanded
from grid.grid_case import GridCase
from powerflow.flow_state import FlowState
from powerflow.network_matrices import build_susceptance
from powerflow.topology import is_islanding


def bus_injections(case: GridCase) -> np.ndarray:
    """
    Net scheduled active injection per bus (per unit), shunt losses included.

    Args:
        case: The network

    Returns:
        Injection vector ordered as case.buses
    """
    p_bus = np.array([-(bus.p_demand + bus.g_shunt) for bus in case.buses])
    pos = case.bus_position
    for gen in case.gens:
        p_bus[pos[gen.bus]] += gen.p_out
    return p_bus / case.base_mva


def solve_dc(case: GridCase, removed_lines: Iterable[int] = frozenset()) -> FlowState:
    """
    Solve the DC power flow with some lines out of service.

    The slack angle is fixed at zero and the slack bus absorbs the imbalance.

    Args:
        case: The network
        removed_lines: 1-based line numbers out of service

    Returns:
        FlowState with |P| per line in MW (0 for removed lines)

    Raises:
        Islanded: If the surviving network is disconnected
    """
    removed = frozenset(removed_lines)
    if is_islanding(case, removed):
        raise Islanded(f"Removing lines {sorted(removed)} disconnects the network")

    model = build_susceptance(case, removed)
    n_bus = len(case.buses)
    slack = case.slack_position
    others = np.array([k for k in range(n_bus) if k != slack], dtype=int)

    p_bus = bus_injections(case) - model.p_bus_shift
    theta = np.zeros(n_bus)
    if len(others):
        reduced = model.bbus[others][:, others].tocsc()
        theta[others] = np.atleast_1d(spsolve(reduced, p_bus[others]))

    p_line = np.zeros(case.n_lines)
    flows = model.bf @ theta + model.p_f_shift
    p_line[model.live] = np.abs(flows) * case.base_mva
    return FlowState(p_line=p_line, converged=True, iterations=0, removed=removed,
                     voltages=np.exp(1j * theta))


def nodal_residual(case: GridCase, removed_lines: Iterable[int], theta: np.ndarray) -> np.ndarray:
    """
    Active power balance residual at every non-slack bus (MW).

    Args:
        case: The network
        removed_lines: Lines out of service
        theta: Bus voltage angles (radians)

    Returns:
        B·theta + shift injections - scheduled injections, slack excluded
    """
    model = build_susceptance(case, frozenset(removed_lines))
    residual = model.bbus @ theta + model.p_bus_shift - bus_injections(case)
    residual[case.slack_position] = 0.0
    return residual * case.base_mva
