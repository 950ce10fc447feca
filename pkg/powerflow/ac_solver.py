"""
AC power flow.
Polar Newton-Raphson with sparse Jacobian and PV->PQ switching on
generator reactive limits. The slack bus absorbs every imbalance.
"""

import logging
from typing import Iterable, Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix, diags, hstack, vstack
from scipy.sparse.linalg import spsolve

from config import AC_MAX_ITERATIONS, AC_TOLERANCE, ENFORCE_Q_LIMITS, MAX_Q_LIMIT_PASSES
from errors import Islanded, NonConvergence
from grid.grid_case import BusKind, GridCase
from powerflow.flow_state import FlowState
from powerflow.network_matrices import AdmittanceModel, build_admittance
from powerflow.topology import is_islanding

logger = logging.getLogger(__name__)


def solve_ac(case: GridCase, removed_lines: Iterable[int] = frozenset(),
             warm_start: Optional[np.ndarray] = None,
             tolerance: float = AC_TOLERANCE,
             max_iterations: int = AC_MAX_ITERATIONS,
             enforce_q_limits: bool = ENFORCE_Q_LIMITS) -> FlowState:
    """
    Solve the AC power flow with some lines out of service.

    Args:
        case: The network
        removed_lines: 1-based line numbers out of service
        warm_start: Complex bus voltages to start from (flat start if None)
        tolerance: Max absolute mismatch accepted (per unit)
        max_iterations: Newton iteration cap per pass
        enforce_q_limits: Switch PV buses violating reactive limits to PQ

    Returns:
        Converged FlowState with |P_from| per line in MW (0 for removed lines)

    Raises:
        Islanded: If the surviving network is disconnected
        NonConvergence: If Newton-Raphson hits its iteration cap
    """
    removed = frozenset(removed_lines)
    if is_islanding(case, removed):
        raise Islanded(f"Removing lines {sorted(removed)} disconnects the network")

    model = build_admittance(case, removed)
    kinds = np.array([bus.kind.value for bus in case.buses], dtype=object)
    s_bus, q_max, q_min, v_set = _injections(case)
    v0 = _initial_voltage(case, v_set, kinds, warm_start)

    total_iterations = 0
    for _ in range(MAX_Q_LIMIT_PASSES + 1):
        v, iterations, mismatch = _newton(model.ybus, s_bus, v0, kinds, tolerance, max_iterations)
        total_iterations += iterations
        if not mismatch <= tolerance:
            raise NonConvergence(
                f"Newton-Raphson did not converge in {max_iterations} iterations "
                f"(mismatch {mismatch:.3e}, removed {sorted(removed)})"
            )
        if not enforce_q_limits:
            break
        switched = _switch_q_limited(case, model, v, kinds, s_bus, q_max, q_min)
        if not switched:
            break
        v0 = v
    else:
        logger.warning("Reactive limit switching did not settle after %d passes", MAX_Q_LIMIT_PASSES)

    p_line = np.zeros(case.n_lines)
    s_from = v[model.from_pos] * np.conj(model.yf @ v)
    p_line[model.live] = np.abs(s_from.real) * case.base_mva
    return FlowState(p_line=p_line, converged=True, iterations=total_iterations,
                     max_mismatch=mismatch, removed=removed, voltages=v)


def _injections(case: GridCase) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Scheduled complex injections (pu) plus per-bus reactive limits (MVAr) and setpoints."""
    n_bus = len(case.buses)
    pos = case.bus_position
    s_bus = np.array([-(bus.p_demand + 1j * bus.q_demand) for bus in case.buses], dtype=complex)
    q_max = np.zeros(n_bus)
    q_min = np.zeros(n_bus)
    v_set = np.array([bus.v_mag for bus in case.buses])
    for gen in case.gens:
        k = pos[gen.bus]
        s_bus[k] += gen.p_out + 1j * gen.q_out
        q_max[k] += gen.q_max
        q_min[k] += gen.q_min
        v_set[k] = gen.v_setpoint
    return s_bus / case.base_mva, q_max, q_min, v_set


def _initial_voltage(case: GridCase, v_set: np.ndarray, kinds: np.ndarray,
                     warm_start: Optional[np.ndarray]) -> np.ndarray:
    regulated = kinds != BusKind.PQ.value
    if warm_start is not None and len(warm_start) == len(case.buses):
        vm = np.where(regulated, v_set, np.abs(warm_start))
        return vm * np.exp(1j * np.angle(warm_start))
    vm = np.where(regulated, v_set, 1.0)
    return vm.astype(complex)


def _newton(ybus: csr_matrix, s_bus: np.ndarray, v0: np.ndarray, kinds: np.ndarray,
            tolerance: float, max_iterations: int) -> Tuple[np.ndarray, int, float]:
    """
    Run polar Newton-Raphson iterations.

    Returns:
        Final voltages, iterations used and the max absolute mismatch (pu)
    """
    pv = np.flatnonzero(kinds == BusKind.PV.value)
    pq = np.flatnonzero(kinds == BusKind.PQ.value)
    pvpq = np.concatenate([pv, pq])
    n_pvpq = len(pvpq)

    v = v0.copy()
    vm = np.abs(v)
    va = np.angle(v)

    def mismatch_vector(voltage: np.ndarray) -> np.ndarray:
        mis = voltage * np.conj(ybus @ voltage) - s_bus
        return np.concatenate([mis[pvpq].real, mis[pq].imag])

    f = mismatch_vector(v)
    norm = float(np.max(np.abs(f))) if f.size else 0.0
    iterations = 0
    while norm > tolerance and iterations < max_iterations:
        iterations += 1
        ds_dvm, ds_dva = _dsbus_dv(ybus, v)
        j11 = ds_dva[pvpq][:, pvpq].real
        j12 = ds_dvm[pvpq][:, pq].real
        j21 = ds_dva[pq][:, pvpq].imag
        j22 = ds_dvm[pq][:, pq].imag
        jacobian = vstack([hstack([j11, j12]), hstack([j21, j22])], format="csc")
        dx = -np.atleast_1d(spsolve(jacobian, f))
        if not np.all(np.isfinite(dx)):
            return v, iterations, float("inf")
        va[pvpq] += dx[:n_pvpq]
        vm[pq] += dx[n_pvpq:]
        v = vm * np.exp(1j * va)
        f = mismatch_vector(v)
        norm = float(np.max(np.abs(f)))
        if not np.isfinite(norm):
            return v, iterations, float("inf")
    return v, iterations, norm


def _dsbus_dv(ybus: csr_matrix, v: np.ndarray) -> Tuple[csr_matrix, csr_matrix]:
    """Partial derivatives of bus injections with respect to |V| and angle."""
    i_bus = ybus @ v
    diag_v = diags(v)
    diag_i = diags(i_bus)
    diag_v_norm = diags(v / np.abs(v))
    ds_dvm = diag_v @ (ybus @ diag_v_norm).conj() + diag_i.conj() @ diag_v_norm
    ds_dva = 1j * diag_v @ (diag_i - ybus @ diag_v).conj()
    return csr_matrix(ds_dvm), csr_matrix(ds_dva)


def _switch_q_limited(case: GridCase, model: AdmittanceModel, v: np.ndarray, kinds: np.ndarray,
                      s_bus: np.ndarray, q_max: np.ndarray, q_min: np.ndarray) -> bool:
    """
    Convert PV buses whose generator reactive output violates a limit to PQ.

    The bus's reactive injection is pinned at the violated limit. Updates
    `kinds` and `s_bus` in place.

    Returns:
        True if any bus was switched
    """
    s_calc = v * np.conj(model.ybus @ v)
    q_demand = np.array([bus.q_demand for bus in case.buses])
    q_gen = s_calc.imag * case.base_mva + q_demand
    switched = False
    for k in np.flatnonzero(kinds == BusKind.PV.value):
        limit = None
        if q_gen[k] > q_max[k] + 1e-6:
            limit = q_max[k]
        elif q_gen[k] < q_min[k] - 1e-6:
            limit = q_min[k]
        if limit is None:
            continue
        logger.debug("Bus %d hit its reactive limit (%.2f MVAr); switching PV->PQ",
                     case.buses[k].id, limit)
        kinds[k] = BusKind.PQ.value
        s_bus[k] = s_bus[k].real + 1j * (limit - q_demand[k]) / case.base_mva
        switched = True
    return switched

