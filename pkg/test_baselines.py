"""
Tests for the influence graph and uniform random baselines.
"""

import numpy as np
import pytest

from cascade.anomaly_metrics import CascadeSequence
from cascade.simulator import sample_stochastic_cascades
from prediction.influence_graph import (InfluenceGraph, InfluenceGraphPredictor, ig_cci,
                                        ig_explore, ig_predict, train_ig)
from prediction.random_predictor import RandomPredictor, random_precision_expectation


def corpus(*sequences):
    return [CascadeSequence(tuple(lines)) for lines in sequences]


# ============================
# Influence graph training
# ============================

def test_transitions_split_evenly():
    graph = train_ig(corpus((1, 2), (1, 3)), lines=(1, 2, 3))
    assert graph.counts[0].tolist() == [0, 1, 1]
    assert np.allclose(graph.probs[0], [0.0, 0.5, 0.5])
    assert not graph.probs[1].any()


def test_single_stage_corpus_has_no_transitions():
    graph = train_ig(corpus((1,), (2,), (3,)), lines=(1, 2, 3))
    assert not graph.counts.any()
    assert not graph.probs.any()


def test_every_consecutive_pair_is_counted():
    graph = train_ig(corpus((1, 2, 3), (2, 3), (3, 1, 2)), lines=(1, 2, 3))
    assert graph.counts.tolist() == [[0, 2, 0], [0, 0, 2], [1, 0, 0]]
    assert np.allclose(graph.probs.sum(axis=1), 1.0)


def test_lines_outside_the_space_are_skipped():
    graph = train_ig(corpus((1, 9, 2), (1, 2)), lines=(1, 2))
    assert graph.counts.tolist() == [[0, 1], [0, 0]]


def test_training_needs_sequences():
    with pytest.raises(ValueError):
        train_ig([], lines=(1, 2))


def test_graph_validates_counts():
    with pytest.raises(ValueError):
        InfluenceGraph(np.zeros((2, 3)), (1, 2))
    with pytest.raises(ValueError):
        InfluenceGraph(np.array([[0, -1], [0, 0]]), (1, 2))


# ============================
# Influence graph prediction
# ============================

def test_prediction_follows_the_latest_failure():
    graph = train_ig(corpus((1, 2), (1, 3), (1, 3), (2, 4)), lines=(1, 2, 3, 4))
    prediction = ig_predict(graph, [1], kappa=25.0)
    assert prediction.selected == (3,)
    assert prediction.scores()[2] == pytest.approx(1 / 3)
    assert prediction.scores()[3] == pytest.approx(2 / 3)


def test_earlier_failures_are_zeroed_and_the_row_renormalized():
    graph = train_ig(corpus((3, 1), (3, 1), (3, 2), (3, 4)), lines=(1, 2, 3, 4))
    scores = InfluenceGraphPredictor(graph).scores([1, 3])
    assert 1 not in scores and 3 not in scores
    assert scores[2] == pytest.approx(0.5)
    assert scores[4] == pytest.approx(0.5)


def test_renormalized_scores_sum_to_one(rng):
    lines = tuple(range(1, 9))
    sequences = [tuple(rng.permutation(lines)[:4]) for _ in range(200)]
    predictor = InfluenceGraphPredictor(train_ig(corpus(*sequences), lines))
    for failed in ([1], [2, 5], [7, 3, 1]):
        assert sum(predictor.scores(failed).values()) == pytest.approx(1.0)


def test_unseen_parent_predicts_nothing():
    graph = train_ig(corpus((1, 2)), lines=(1, 2, 3))
    prediction = ig_predict(graph, [3], kappa=100.0)
    assert prediction.all_zero
    assert prediction.selected == ()
    assert ig_predict(graph, [7], kappa=100.0).all_zero


def test_explore_follows_observed_transitions():
    graph = train_ig(corpus((1, 2, 3), (2, 3)), lines=(1, 2, 3))
    assert ig_explore(graph, kappa=40.0, horizon=3) == [(1, 2, 3), (2, 3), (3,)]


def test_trained_on_sampled_dc_cascades(tiny_case, tiny_limits):
    training = sample_stochastic_cascades(tiny_case, tiny_limits.scaled(0.8), horizon=3,
                                          count=200, seed=2)
    space = (1, 2, 3, 4, 5)
    graph = train_ig(training, lines=space)
    # a trip of the radial spur is recorded but never counted
    expected = sum(1 for seq in training for parent, child in zip(seq.lines, seq.lines[1:])
                   if parent in space and child in space)
    assert graph.counts.sum() == expected
    found = ig_cci(graph, tiny_case, tiny_limits, kappa=40.0, horizon=3, d=4)
    assert len(found.top) <= 4
    assert found.n_candidates >= 1


# ============================
# Random baseline
# ============================

def test_random_selection_respects_the_budget():
    predictor = RandomPredictor(range(1, 20), seed=3)
    prediction = predictor.predict([4, 7], kappa=25.0)
    assert len(prediction.selected) == 5
    assert set(prediction.selected).isdisjoint({4, 7})
    assert list(prediction.selected) == sorted(prediction.selected)


def test_random_selection_is_seeded():
    a = RandomPredictor(range(1, 20), seed=3)
    b = RandomPredictor(range(1, 20), seed=3)
    assert [a.predict([1], 20.0).selected for _ in range(5)] == \
        [b.predict([1], 20.0).selected for _ in range(5)]


def test_random_selection_is_capped_by_remaining_lines():
    predictor = RandomPredictor(range(1, 5), seed=0)
    assert predictor.predict([1, 2, 3], kappa=100.0).selected == (4,)
    assert predictor.predict([1, 2, 3, 4], kappa=100.0).all_zero


def test_random_expectation():
    assert random_precision_expectation(19, 25.0, 1) == pytest.approx(5 / 18)
    assert random_precision_expectation(19, 100.0, 3) == 1.0
    assert random_precision_expectation(4, 100.0, 3) == 1.0
    with pytest.raises(ValueError):
        random_precision_expectation(4, 50.0, 4)


def test_random_hit_rate_matches_expectation():
    predictor = RandomPredictor(range(1, 20), seed=11)
    hits = sum(6 in predictor.predict([2], kappa=25.0).selected for _ in range(4000))
    assert hits / 4000 == pytest.approx(random_precision_expectation(19, 25.0, 1), abs=0.03)
