"""
Tests for run artifact persistence.
"""

import json

import numpy as np
import pytest
from PIL import Image

from cascade.anomaly_metrics import AnomalyVector, CascadeSequence, TerminalReason
from cascade.simulator import GroundTruthSet
from errors import CorruptArtifact, MissingArtifact
from grid.line_limits import LineLimits
from learning.causal_learn import CausalModel, CausalModelSet
from learning.dataset_gen import ObservationalDataset
from prediction.influence_graph import train_ig
from storage.file_manager import COLORS, RunFileManager, sha256_file


@pytest.fixture
def files(tmp_path):
    return RunFileManager(tmp_path / "run")


def sample_cascades():
    sequences = (
        CascadeSequence.build((1, 3), [AnomalyVector(np.array([-1.0, 0.2, 0.3]), 1),
                                       AnomalyVector(np.array([0.0, 0.5, -1.0]), 2)],
                              TerminalReason.LIMITS_OK),
        CascadeSequence.build((2, 1), [AnomalyVector(np.array([0.1, -1.0, 0.0]), 1)],
                              TerminalReason.ISLANDED),
    )
    return GroundTruthSet(sequences, horizon=3, case_id="tiny5", load_scale=1.1, flow_model="ac")


def test_case_round_trip(files, case14):
    files.save_case(case14)
    assert files.load_case() == case14


def test_limits_round_trip(files):
    files.save_limits(LineLimits(np.array([10.0, 2.5, 7.0])), alpha=1.3, floor=1.0)
    assert files.load_limits().p_max.tolist() == [10.0, 2.5, 7.0]
    payload = files.read_json(files.path("limits.json"))
    assert payload["alpha"] == 1.3


def test_missing_artifacts_name_their_producer(files):
    with pytest.raises(MissingArtifact) as info:
        files.load_datasets()
    assert info.value.producer == "gen-data"
    with pytest.raises(MissingArtifact) as info:
        files.load_models()
    assert info.value.producer == "learn"
    with pytest.raises(MissingArtifact):
        files.load_cascades("ground_truth_load1.00")
    assert not files.has_cascades("ground_truth_load1.00")


def test_json_is_deterministic(files):
    files.write_json(files.path("a.json"), {"b": 1, "a": [1, 2]})
    files.write_json(files.path("b.json"), {"a": [1, 2], "b": 1})
    assert sha256_file(files.path("a.json")) == sha256_file(files.path("b.json"))


def test_invalid_json_is_reported(files):
    files.path().mkdir(parents=True)
    files.path("bad.json").write_text("{not json", encoding="utf-8")
    with pytest.raises(CorruptArtifact):
        files.read_json(files.path("bad.json"))


# ============================
# Datasets and models
# ============================

def test_datasets_round_trip_with_digests(files, rng):
    datasets = {k: ObservationalDataset(k, rng.normal(size=(6, 3)), (1, 2, 3), dropped=k - 1)
                for k in (1, 2, 3)}
    files.save_datasets(datasets, {"steps": 6, "seed": 0})
    loaded = files.load_datasets()
    assert sorted(loaded) == [1, 2, 3]
    for k in datasets:
        assert np.array_equal(loaded[k].samples, datasets[k].samples)
        assert loaded[k].dropped == k - 1
    manifest = files.read_json(files.path("datasets", "manifest.json"))
    assert manifest["profile"] == {"steps": 6, "seed": 0}
    assert files.dataset_digests()[2] == sha256_file(files.path("datasets", "dataset_k2.npy"))


def test_tampered_dataset_is_rejected(files, rng):
    files.save_datasets({1: ObservationalDataset(1, rng.normal(size=(4, 2)), (1, 2))}, {})
    np.save(files.path("datasets", "dataset_k1.npy"), np.zeros((4, 2)))
    with pytest.raises(CorruptArtifact):
        files.load_datasets()


def test_models_round_trip(files):
    b = np.array([[0.0, 0.3], [-0.2, 0.0]])
    models = CausalModelSet({4: CausalModel(b, 4, 0.05, (4, 9), 1.7, seed=3)}, (4, 9))
    files.save_models(models, {4: "abc"})
    loaded = files.load_models()
    assert np.array_equal(loaded[4].b, b)
    assert loaded[4].tau == 0.05 and loaded[4].seed == 3
    assert loaded.lines == (4, 9)
    manifest = files.read_json(files.path("models", "manifest.json"))
    assert manifest["models"]["4"]["dataset_sha256"] == "abc"


def test_tampered_model_is_rejected(files):
    b = np.array([[0.0, 0.3], [-0.2, 0.0]])
    files.save_models(CausalModelSet({4: CausalModel(b, 4, 0.05, (4, 9), 1.7, seed=3)}, (4, 9)))
    np.save(files.path("models", "model_k4.npy"), np.zeros((2, 2)))
    with pytest.raises(CorruptArtifact):
        files.load_models()


def test_tampered_influence_graph_is_rejected(files):
    files.save_influence_graph(train_ig([CascadeSequence((1, 2))], (1, 2)), {"count": 1})
    np.save(files.path("models", "influence_graph.npy"), np.ones((2, 2)))
    with pytest.raises(CorruptArtifact):
        files.load_influence_graph()


def test_influence_graph_round_trip(files):
    graph = train_ig([CascadeSequence((1, 2)), CascadeSequence((2, 3))], (1, 2, 3))
    files.save_influence_graph(graph, {"count": 2, "seed": 0})
    loaded = files.load_influence_graph()
    assert np.array_equal(loaded.counts, graph.counts)
    assert loaded.lines == (1, 2, 3)


# ============================
# Cascade sets
# ============================

def test_cascades_round_trip(files):
    cascades = sample_cascades()
    path = files.save_cascades("ground_truth_load1.10", cascades)
    loaded = files.load_cascades("ground_truth_load1.10")
    assert [seq.lines for seq in loaded] == [(1, 3), (2, 1)]
    assert [seq.terminal_reason for seq in loaded] == [TerminalReason.LIMITS_OK,
                                                      TerminalReason.ISLANDED]
    assert loaded.sequences[0].cost == pytest.approx(3.0)
    assert np.allclose(loaded.sequences[0].anomalies[1].s, [0.0, 0.5, -1.0])
    assert (loaded.horizon, loaded.case_id, loaded.load_scale) == (3, "tiny5", 1.1)
    sidecar = files.read_json(path.with_suffix(".json"))
    assert sidecar["count"] == 2
    assert sidecar["sha256"] == sha256_file(path)


def test_cascades_without_anomalies_keep_cost(files):
    files.save_cascades("ig_training", sample_cascades(), include_anomalies=False)
    record = json.loads(files.path("ground_truth", "ig_training.jsonl").read_text().splitlines()[0])
    assert "stage_anomalies" not in record
    loaded = files.load_cascades("ig_training", producer="learn")
    assert loaded.sequences[1].cost == pytest.approx(1.1)
    assert loaded.sequences[1].anomalies == ()


def test_corrupted_cascade_line(files):
    path = files.save_cascades("broken", sample_cascades())
    with open(path, "a", encoding="utf-8") as f:
        f.write('{"lines": [1, 1], "cost": 0, "terminal_reason": "horizon"}\n')
    with pytest.raises(CorruptArtifact):
        files.load_cascades("broken")


# ============================
# Image export
# ============================

def test_heat_map_colors_follow_sign(tmp_path):
    b = np.array([[0.0, 2.0], [-2.0, 0.0]])
    path = RunFileManager.export_matrix_image(b, tmp_path / "img" / "model.png", cell_size=10)
    with Image.open(path) as img:
        assert img.size == (20, 20)
        assert img.getpixel((15, 5)) == COLORS["positive"]
        assert img.getpixel((5, 15)) == COLORS["negative"]
        assert img.getpixel((5, 5)) == COLORS["background"]


def test_heat_map_rejects_bad_shapes(tmp_path):
    with pytest.raises(ValueError):
        RunFileManager.export_matrix_image(np.zeros((2, 3)), tmp_path / "x.png")
    with pytest.raises(ValueError):
        RunFileManager.export_matrix_image(np.zeros((600, 600)), tmp_path / "x.png", cell_size=20)
