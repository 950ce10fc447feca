"""
Tests for anomaly indices, discretized failure states, cascade cost,
precision and regret.
"""

import numpy as np
import pytest

from cascade.anomaly_metrics import (AnomalyVector, CascadeSequence, DiscreteAnomalyState,
                                     TerminalReason, anomaly_index, cascade_cost, discretize,
                                     failure_onsets, precision, regret)
from errors import DimensionMismatch, EmptyTruth, ZeroTruthCost
from grid.line_limits import LineLimits
from powerflow.topology import LineSpace


@pytest.fixture
def limits():
    return LineLimits(np.array([100.0, 50.0, 20.0, 10.0]))


def test_anomaly_index_normalizes_by_limit(limits):
    s = anomaly_index([110.0, 25.0, 20.0, 0.0], [100.0, 50.0, 10.0, 5.0], limits, stage=2)
    assert np.allclose(s.s, [0.1, -0.5, 0.5, -0.5])
    assert s.stage == 2
    assert len(s) == 4


def test_anomaly_index_is_zero_without_change(limits):
    flows = np.array([10.0, 20.0, 5.0, 1.0])
    assert not np.any(anomaly_index(flows, flows, limits).s)


def test_anomaly_index_restricts_to_line_space(limits):
    lines = LineSpace((1, 2, 4), 4)
    s = anomaly_index([110.0, 25.0, 20.0, 0.0], [100.0, 50.0, 10.0, 5.0], limits, lines=lines)
    assert np.allclose(s.s, [0.1, -0.5, -0.5])


def test_anomaly_index_length_mismatch(limits):
    with pytest.raises(DimensionMismatch):
        anomaly_index([1.0, 2.0], [1.0, 2.0], limits)


def test_anomaly_vector_is_read_only():
    vector = AnomalyVector(np.array([0.1, 0.2]), stage=1)
    with pytest.raises(ValueError):
        vector.s[0] = 1.0
    with pytest.raises(ValueError):
        AnomalyVector(np.array([np.nan]), stage=1)


# ============================
# Discretization
# ============================

def test_binary_states_mark_overloads_and_removals(limits):
    flows = np.array([100.0, 10.0, 0.0, 3.0])
    s = anomaly_index(flows, np.array([90.0, 10.0, 5.0, 3.0]), limits)
    state = discretize(s, flows, limits, removed=[3])
    assert list(state.levels) == [2, 1, 2, 1]
    assert state.failed == frozenset({0, 2})
    assert state.healthy == frozenset({1, 3})


def test_graded_levels_follow_thresholds(limits):
    s = AnomalyVector(np.array([0.0, 0.05, 0.3, 0.7]), stage=1)
    flows = np.array([1.0, 1.0, 1.0, 1.0])
    state = discretize(s, flows, limits, T=4, thresholds=(0.1, 0.5))
    assert list(state.levels) == [1, 2, 3, 4]


def test_graded_overload_is_top_level(limits):
    s = AnomalyVector(np.array([0.01, 0.0, 0.0, 0.0]), stage=1)
    flows = np.array([100.0, 1.0, 1.0, 1.0])
    state = discretize(s, flows, limits, T=3, thresholds=(0.5,))
    assert state.levels[0] == 3
    assert state.failed == frozenset({0})


@pytest.mark.parametrize("T, thresholds", [(2, (0.1,)), (4, (0.1,)), (4, (0.5, 0.1))])
def test_threshold_count_and_order_are_checked(limits, T, thresholds):
    s = AnomalyVector(np.zeros(4), stage=1)
    with pytest.raises(ValueError):
        discretize(s, np.zeros(4), limits, T=T, thresholds=thresholds)


def test_failure_onsets():
    previous = DiscreteAnomalyState(np.array([1, 1, 2, 1]), T=2)
    current = DiscreteAnomalyState(np.array([2, 1, 2, 2]), T=2)
    assert failure_onsets(previous, current) == frozenset({0, 3})
    with pytest.raises(DimensionMismatch):
        failure_onsets(previous, DiscreteAnomalyState(np.array([1, 2]), T=2))


# ============================
# Cascade sequences and cost
# ============================

def test_cost_sums_absolute_anomalies():
    anomalies = [AnomalyVector(np.array([0.5, -0.25]), 1), AnomalyVector(np.array([-1.0, 0.0]), 2)]
    seq = CascadeSequence.build((3, 5), anomalies, TerminalReason.HORIZON)
    assert seq.cost == pytest.approx(1.75)
    assert cascade_cost(seq) == pytest.approx(1.75)
    assert seq.stages == (frozenset({3}), frozenset({5}))


def test_zero_flow_change_costs_nothing():
    seq = CascadeSequence.build((1,), [AnomalyVector(np.zeros(3), 1)], TerminalReason.LIMITS_OK)
    assert seq.cost == 0.0


def test_sequence_rejects_repeats_and_extra_anomalies():
    with pytest.raises(ValueError):
        CascadeSequence((1, 2, 1))
    with pytest.raises(ValueError):
        CascadeSequence(())
    with pytest.raises(ValueError):
        CascadeSequence((1,), (AnomalyVector(np.zeros(2), 1), AnomalyVector(np.zeros(2), 2)))


# ============================
# Precision and regret
# ============================

def test_precision_counts_stagewise_hits():
    truth = CascadeSequence((1, 2, 3))
    assert precision([{2}, {3}], truth) == 1.0
    assert precision([{2, 5}, {4}], truth) == 0.5
    assert precision([set(), set()], truth) == 0.0


def test_precision_of_ground_truth_predictions_is_one():
    truth = CascadeSequence((4, 9, 1, 7))
    assert precision([{line} for line in truth.lines[1:]], truth) == 1.0


def test_precision_needs_a_second_stage():
    with pytest.raises(EmptyTruth):
        precision([], CascadeSequence((1,)))
    with pytest.raises(DimensionMismatch):
        precision([{2}], CascadeSequence((1, 2, 3)))


def test_regret_compares_total_costs():
    truth = [CascadeSequence((1, 2), cost=4.0), CascadeSequence((2, 3), cost=6.0)]
    predicted = [CascadeSequence((1, 2), cost=4.0), CascadeSequence((3,), cost=1.0)]
    assert regret(predicted, truth) == pytest.approx(0.5)
    assert regret(truth, truth) == 0.0
    assert regret([], truth) == 1.0
    assert regret([2.0, 3.0], [5.0, 5.0]) == pytest.approx(0.5)


def test_regret_is_nonnegative_against_the_true_top(rng):
    costs = rng.uniform(0, 5, size=30)
    top = sorted(costs, reverse=True)[:5]
    for _ in range(20):
        picked = rng.choice(costs, size=5, replace=False)
        assert regret(list(picked), top) >= -1e-12


def test_regret_undefined_for_zero_truth_cost():
    with pytest.raises(ZeroTruthCost):
        regret([1.0], [0.0])
