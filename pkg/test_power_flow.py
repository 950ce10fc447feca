"""
Tests for the AC and DC power flow solvers and islanding detection.
"""

import numpy as np
import pytest

from conftest import case_path
from errors import Islanded, NonConvergence
from grid.case_parser import load_case
from grid.grid_case import BusKind
from powerflow.ac_solver import solve_ac
from powerflow.dc_solver import bus_injections, nodal_residual, solve_dc
from powerflow.network_matrices import build_admittance, build_susceptance
from powerflow.topology import LineSpace, is_islanding


def active_mismatch_mw(case, state):
    """Recomputed |P_calc - P_scheduled| at every non-slack bus (MW)."""
    model = build_admittance(case, state.removed)
    v = state.voltages
    p_calc = (v * np.conj(model.ybus @ v)).real * case.base_mva
    p_sched = np.array([-bus.p_demand for bus in case.buses])
    for gen in case.gens:
        p_sched[case.bus_position[gen.bus]] += gen.p_out
    mismatch = np.abs(p_calc - p_sched)
    mismatch[case.slack_position] = 0.0
    return mismatch


def test_case14_base_flow_matches_reference(case14, base14):
    assert base14.converged
    assert base14.max_mismatch <= 1e-8
    # slack output and the 1-2 flow of the published solution
    v = base14.voltages
    model = build_admittance(case14)
    s_slack = v[0] * np.conj((model.ybus @ v)[0]) * case14.base_mva
    assert s_slack.real == pytest.approx(232.39, abs=0.5)
    assert base14.p_line[0] == pytest.approx(156.88, abs=0.5)
    assert np.abs(v[case14.bus_position[14]]) == pytest.approx(1.036, abs=0.01)


def test_regulated_buses_hold_their_setpoints(case14, base14):
    for gen in case14.gens:
        k = case14.bus_position[gen.bus]
        if case14.buses[k].kind != BusKind.PQ:
            assert abs(base14.voltages[k]) == pytest.approx(gen.v_setpoint, abs=1e-9)


def test_recomputed_mismatch_is_small(case14, base14):
    assert active_mismatch_mw(case14, base14).max() < 1e-5


def test_newton_iterates_and_outages_move_flow(case14, base14):
    # a flat start is never already solved
    assert base14.iterations > 0
    after = solve_ac(case14, {1})
    assert after.iterations > 0
    # with 1-2 out, bus 1 exports everything over 1-5
    assert after.p_line[0] == 0
    assert after.p_line[1] > base14.p_line[1] + 1.0


@pytest.mark.parametrize("line", [1, 3, 7, 10, 20])
def test_single_outage_converges(case14, base14, line):
    state = solve_ac(case14, {line}, warm_start=base14.voltages)
    assert state.max_mismatch <= 1e-8
    assert state.p_line[line - 1] == 0
    assert state.removed == frozenset({line})
    assert active_mismatch_mw(case14, state).max() < 1e-5


def test_warm_start_matches_flat_start(case14, base14):
    flat = solve_ac(case14, {5})
    warm = solve_ac(case14, {5}, warm_start=base14.voltages)
    assert np.allclose(flat.p_line, warm.p_line, atol=1e-6)


def test_islanding_outage_raises(case14):
    assert is_islanding(case14, {14})
    with pytest.raises(Islanded):
        solve_ac(case14, {14})
    with pytest.raises(Islanded):
        solve_dc(case14, {14})


def test_iteration_cap_raises_nonconvergence(case14):
    with pytest.raises(NonConvergence):
        solve_ac(case14.scale_loads(1.2), max_iterations=1)


def test_base_flow_does_not_depend_on_removal_order(case14, base14):
    a = solve_ac(case14, [3, 10], warm_start=base14.voltages)
    b = solve_ac(case14, [10, 3], warm_start=base14.voltages)
    assert np.array_equal(a.p_line, b.p_line)


# ============================
# DC power flow
# ============================

def test_dc_nodal_balance(case14):
    state = solve_dc(case14)
    theta = np.angle(state.voltages)
    residual = nodal_residual(case14, state.removed, theta)
    assert np.abs(residual).max() <= 1e-10 * case14.total_load
    assert theta[case14.slack_position] == 0.0


def test_dc_slack_absorbs_the_imbalance(tiny_case):
    state = solve_dc(tiny_case)
    theta = np.angle(state.voltages)
    model = build_susceptance(tiny_case)
    p_calc = model.bbus @ theta + model.p_bus_shift
    # slack injection equals the scheduled deficit of the other buses
    deficit = bus_injections(tiny_case).sum() - bus_injections(tiny_case)[tiny_case.slack_position]
    assert p_calc[tiny_case.slack_position] == pytest.approx(-deficit, abs=1e-10)
    assert state.iterations == 0
    assert np.all(state.p_line >= 0)


def test_dc_outage_redistributes_flow(tiny_case):
    base = solve_dc(tiny_case)
    after = solve_dc(tiny_case, {5})
    assert after.p_line[4] == 0
    assert after.p_line[3] > base.p_line[3]


def test_dc_close_to_ac_on_the_base_case(case14, base14):
    dc = solve_dc(case14)
    # lossless approximation stays within a few MW on the main corridor
    assert dc.p_line[0] == pytest.approx(base14.p_line[0], rel=0.1)


@pytest.mark.parametrize("outage", [None, 1, 3, 7, 10])
def test_dc_tracks_ac_under_light_load(case14, limits14, outage):
    light = case14.scale_loads(0.5)
    removed = set() if outage is None else {outage}
    ac = solve_ac(light, removed)
    dc = solve_dc(light, removed)
    assert ac.iterations > 0
    # per-line gap within a tenth of the limit, plus 1 MW for near-idle lines
    assert np.all(np.abs(ac.p_line - dc.p_line) <= 0.1 * limits14.p_max + 1.0)


def test_susceptance_matrix_is_singular_before_reduction(case14):
    model = build_susceptance(case14)
    assert np.allclose(np.asarray(model.bbus.sum(axis=1)).ravel(), 0.0)


@pytest.mark.parametrize("name", ["case39.m", "case118.m"])
def test_larger_cases_converge(name):
    case = load_case(case_path(name))
    state = solve_ac(case)
    assert state.max_mismatch <= 1e-8
    dc = solve_dc(case)
    residual = nodal_residual(case, dc.removed, np.angle(dc.voltages))
    assert np.abs(residual).max() <= 1e-10 * case.total_load
    assert len(LineSpace.from_case(case)) > 0
