"""
Tests for the predictor comparison tables and report output.
"""

import pandas as pd
import pytest

from cascade.anomaly_metrics import CascadeSequence
from cascade.simulator import GroundTruthSet, enumerate_ground_truth, enumerate_worst_case
from errors import EmptyTruth
from evaluation.evaluator import PredictorEvaluator
from prediction.base_predictor import BasePredictor
from prediction.random_predictor import RandomPredictor
from storage.file_manager import RunFileManager

LINES = (1, 2, 3, 4, 5)


class OraclePredictor(BasePredictor):
    """Scores exactly the lines that follow a prefix somewhere in the truth."""

    name = "oracle"

    def __init__(self, truth):
        super().__init__(LINES)
        self.truth = truth

    def scores(self, failed):
        prefix = tuple(failed)
        following = {seq.lines[len(prefix)] for seq in self.truth
                     if len(seq) > len(prefix) and seq.lines[:len(prefix)] == prefix}
        return {line: float(line in following) for line in self.lines if line not in failed}


class SilentPredictor(BasePredictor):
    """Never scores anything."""

    name = "silent"

    def scores(self, failed):
        return {line: 0.0 for line in self.lines if line not in failed}


@pytest.fixture(scope="module")
def hand_truth():
    sequences = (CascadeSequence((1, 2, 3)), CascadeSequence((2, 4)), CascadeSequence((5,)))
    return GroundTruthSet(sequences, horizon=3, case_id="tiny5")


@pytest.fixture(scope="module")
def stressed_limits(tiny_limits):
    return tiny_limits.scaled(0.8)


@pytest.fixture(scope="module")
def tiny_truth2(tiny_case, stressed_limits):
    return enumerate_ground_truth(tiny_case, stressed_limits, horizon=2)


# ============================
# Precision
# ============================

def test_oracle_precision_is_one(tiny_case, tiny_limits, hand_truth):
    evaluator = PredictorEvaluator(tiny_case, tiny_limits, [OraclePredictor(hand_truth)], hand_truth,
                                   kappas=(40.0,), horizon=3)
    assert evaluator.mean_precision(evaluator.predictors["oracle"], 40.0) == 1.0


def test_silent_precision_is_zero(tiny_case, tiny_limits, hand_truth):
    silent = SilentPredictor(LINES)
    evaluator = PredictorEvaluator(tiny_case, tiny_limits, [silent], hand_truth, kappas=(40.0,))
    assert evaluator.mean_precision(silent, 40.0) == 0.0


def test_expected_random_precision_averages_stages(tiny_case, tiny_limits, hand_truth):
    evaluator = PredictorEvaluator(tiny_case, tiny_limits, [SilentPredictor(LINES)], hand_truth)
    # budget 2 of 5: (2/4 + 2/3) / 2 for the three-stage sequence, 2/4 for the other
    expected = ((0.5 + 2 / 3) / 2 + 0.5) / 2
    assert evaluator.expected_random_precision(40.0) == pytest.approx(expected)


def test_precision_table_columns(tiny_case, tiny_limits, hand_truth):
    evaluator = PredictorEvaluator(tiny_case, tiny_limits,
                                   [OraclePredictor(hand_truth), SilentPredictor(LINES)], hand_truth,
                                   random_predictor=RandomPredictor(LINES, seed=0),
                                   kappas=(20.0, 100.0))
    table = evaluator.precision_table()
    assert list(table.columns) == ["kappa", "oracle", "silent", "random", "random_expected"]
    assert table["oracle"].tolist() == [1.0, 1.0]
    # every remaining line is drawn at kappa = 100
    assert table.loc[1, "random"] == 1.0
    assert table.loc[1, "random_expected"] == 1.0


def test_single_stage_truth_cannot_be_scored(tiny_case, tiny_limits):
    truth = GroundTruthSet((CascadeSequence((1,)), CascadeSequence((2,))), horizon=3)
    evaluator = PredictorEvaluator(tiny_case, tiny_limits, [SilentPredictor(LINES)], truth)
    with pytest.raises(EmptyTruth):
        evaluator.precision_table()


def test_robustness_rows(tiny_case, tiny_limits, hand_truth):
    evaluator = PredictorEvaluator(tiny_case, tiny_limits, [OraclePredictor(hand_truth)], hand_truth,
                                   kappas=(40.0, 60.0))
    other = GroundTruthSet((CascadeSequence((3, 1)),), horizon=3, load_scale=1.1)
    table = evaluator.robustness_table({1.0: hand_truth, 1.1: other}, predictor_name="oracle")
    assert table["load_scale"].tolist() == [1.0, 1.0, 1.1, 1.1]
    assert table["precision"].tolist()[:2] == [1.0, 1.0]
    assert table["n_sequences"].tolist()[2] == 1


def test_evaluator_needs_a_predictor(tiny_case, tiny_limits, hand_truth):
    with pytest.raises(ValueError):
        PredictorEvaluator(tiny_case, tiny_limits, [], hand_truth)


# ============================
# Critical cascades
# ============================

def test_full_budget_matches_the_ground_truth_costs(tiny_case, stressed_limits, tiny_truth2):
    oracle = OraclePredictor(tiny_truth2)
    evaluator = PredictorEvaluator(tiny_case, stressed_limits, [oracle], tiny_truth2,
                                   kappas=(100.0,), horizon=2, d=3)
    # every truth sequence is explored and replayed on the same flows
    assert evaluator.regret_table().loc[0, "oracle"] <= 1e-9


def test_candidate_table_reports_the_bound(tiny_case, stressed_limits, tiny_truth2):
    evaluator = PredictorEvaluator(tiny_case, stressed_limits, [OraclePredictor(tiny_truth2)],
                                   tiny_truth2, kappas=(20.0, 40.0), horizon=2, d=2)
    table = evaluator.candidate_table()
    assert table["bound"].tolist() == [5 * 1, 5 * 2]
    assert all(table["oracle"] <= table["bound"])


def test_regret_by_d_and_worst_case(tiny_case, stressed_limits, tiny_truth2):
    evaluator = PredictorEvaluator(tiny_case, stressed_limits, [OraclePredictor(tiny_truth2)],
                                   tiny_truth2, kappas=(100.0,), horizon=2, d=2)
    by_d = evaluator.regret_by_d_table(100.0, [1, 2])
    assert by_d["d"].tolist() == [1, 2]
    worst = enumerate_worst_case(tiny_case, stressed_limits, horizon=2, flow_model="ac")
    table = evaluator.worst_case_table(100.0, worst, d=2)
    assert table["source"].tolist()[:2] == ["enumeration", "enumeration"]
    assert table.loc[0, "cost"] >= table.loc[1, "cost"]


def test_regret_uses_only_the_top_d_after_a_deeper_search(tiny_case, stressed_limits, tiny_truth2):
    evaluator = PredictorEvaluator(tiny_case, stressed_limits, [OraclePredictor(tiny_truth2)],
                                   tiny_truth2, kappas=(100.0,), horizon=2, d=1)
    # the cached search now holds more than d sequences
    deeper = evaluator.critical("oracle", 100.0, len(tiny_truth2))
    assert len(deeper.top) > 1
    assert evaluator.regret_table().loc[0, "oracle"] == pytest.approx(0.0, abs=1e-9)


def test_critical_results_are_cached(tiny_case, stressed_limits, tiny_truth2):
    evaluator = PredictorEvaluator(tiny_case, stressed_limits, [OraclePredictor(tiny_truth2)],
                                   tiny_truth2, kappas=(40.0,), horizon=2, d=2)
    first = evaluator.critical("oracle", 40.0)
    assert evaluator.critical("oracle", 40.0) is first


# ============================
# Report
# ============================

def test_run_writes_every_table(tmp_path, tiny_case, stressed_limits, tiny_truth2):
    evaluator = PredictorEvaluator(tiny_case, stressed_limits, [OraclePredictor(tiny_truth2)],
                                   tiny_truth2, random_predictor=RandomPredictor(LINES, seed=1),
                                   kappas=(40.0, 100.0), horizon=2, d=2)
    report = evaluator.run(robustness_truths={1.0: tiny_truth2}, d_values=(1, 2))
    files = RunFileManager(tmp_path)
    written = report.save(files)
    names = {path.name for path in written}
    assert {"precision.csv", "regret.csv", "candidates.csv", "regret_by_d.csv", "robustness.csv",
            "worst_case.csv", "report.json", "report.txt", "timings.csv"} <= names
    saved = pd.read_csv(files.path("evaluation", "precision.csv"))
    assert saved["kappa"].tolist() == [40.0, 100.0]
    assert "PRECISION VS KAPPA" in files.path("evaluation", "report.txt").read_text()
    assert set(report.timings["stage"]) >= {"precision", "explore", "replay"}
