"""
Network admittance matrices.
Builds the AC bus admittance matrix and the DC susceptance matrices for a
case with a set of lines removed.
"""

from dataclasses import dataclass
from typing import FrozenSet, Iterable

import numpy as np
from scipy.sparse import csr_matrix

from grid.grid_case import GridCase


@dataclass(frozen=True)
class AdmittanceModel:
    """
    AC network model of the surviving branches.

    Attributes:
        ybus: Bus admittance matrix (n_bus x n_bus)
        yf: From-end branch admittance matrix (n_live x n_bus)
        from_pos: From-bus position of each live branch
        live: 0-based offsets of the live branches in case.branches
    """

    ybus: csr_matrix
    yf: csr_matrix
    from_pos: np.ndarray
    live: np.ndarray


@dataclass(frozen=True)
class SusceptanceModel:
    """
    DC network model of the surviving branches.

    Attributes:
        bbus: Bus susceptance matrix (n_bus x n_bus)
        bf: Branch flow matrix (n_live x n_bus)
        p_bus_shift: Bus injections due to phase shifters (per unit)
        p_f_shift: Branch flows due to phase shifters (per unit)
        live: 0-based offsets of the live branches in case.branches
    """

    bbus: csr_matrix
    bf: csr_matrix
    p_bus_shift: np.ndarray
    p_f_shift: np.ndarray
    live: np.ndarray


def live_offsets(case: GridCase, removed: Iterable[int]) -> np.ndarray:
    """
    Offsets of the branches that survive a removal set.

    Args:
        case: The network
        removed: 1-based line numbers taken out of service

    Returns:
        Sorted 0-based offsets into case.branches
    """
    gone = {line - 1 for line in removed}
    return np.array([k for k in range(case.n_lines) if k not in gone], dtype=int)


def _endpoints(case: GridCase, live: np.ndarray):
    pos = case.bus_position
    f = np.array([pos[case.branches[k].from_bus] for k in live], dtype=int)
    t = np.array([pos[case.branches[k].to_bus] for k in live], dtype=int)
    return f, t


def build_admittance(case: GridCase, removed: FrozenSet[int] = frozenset()) -> AdmittanceModel:
    """
    Build Ybus and Yf with the standard pi branch model.

    Args:
        case: The network
        removed: Line numbers out of service

    Returns:
        AdmittanceModel of the surviving network
    """
    live = live_offsets(case, removed)
    n_bus = len(case.buses)
    n_live = len(live)
    f, t = _endpoints(case, live)

    branches = [case.branches[k] for k in live]
    r = np.array([br.r for br in branches])
    x = np.array([br.x for br in branches])
    bc = np.array([br.b_charging for br in branches])
    ratio = np.array([br.tap if br.tap != 0 else 1.0 for br in branches])
    shift = np.radians([br.shift for br in branches])
    tap = ratio * np.exp(1j * shift)

    ys = 1.0 / (r + 1j * x)
    ytt = ys + 1j * bc / 2
    yff = ytt / (tap * np.conj(tap))
    yft = -ys / np.conj(tap)
    ytf = -ys / tap

    ysh = np.array([(bus.g_shunt + 1j * bus.b_shunt) / case.base_mva for bus in case.buses])

    rows = np.arange(n_live)
    yf = csr_matrix((np.concatenate([yff, yft]), (np.concatenate([rows, rows]), np.concatenate([f, t]))),
                    shape=(n_live, n_bus))
    ybus = csr_matrix(
        (np.concatenate([yff, yft, ytf, ytt, ysh]),
         (np.concatenate([f, f, t, t, np.arange(n_bus)]),
          np.concatenate([f, t, f, t, np.arange(n_bus)]))),
        shape=(n_bus, n_bus),
    )
    return AdmittanceModel(ybus=ybus, yf=yf, from_pos=f, live=live)


def build_susceptance(case: GridCase, removed: FrozenSet[int] = frozenset()) -> SusceptanceModel:
    """
    Build the DC B matrices (lossless, flat voltage).

    Args:
        case: The network
        removed: Line numbers out of service

    Returns:
        SusceptanceModel of the surviving network
    """
    live = live_offsets(case, removed)
    n_bus = len(case.buses)
    n_live = len(live)
    f, t = _endpoints(case, live)

    branches = [case.branches[k] for k in live]
    ratio = np.array([br.tap if br.tap != 0 else 1.0 for br in branches])
    b = 1.0 / (np.array([br.x for br in branches]) * ratio)
    shift = np.radians([br.shift for br in branches])

    rows = np.arange(n_live)
    incidence = csr_matrix(
        (np.concatenate([np.ones(n_live), -np.ones(n_live)]),
         (np.concatenate([rows, rows]), np.concatenate([f, t]))),
        shape=(n_live, n_bus),
    )
    bf = csr_matrix(incidence.multiply(b[:, None]))
    bbus = csr_matrix(incidence.T @ bf)
    p_f_shift = -b * shift
    p_bus_shift = incidence.T @ p_f_shift
    return SusceptanceModel(bbus=bbus, bf=bf, p_bus_shift=np.asarray(p_bus_shift).ravel(),
                            p_f_shift=p_f_shift, live=live)
