"""
File operations for run artifacts.
Persists cases, limits, datasets, models, cascade sets and prediction results
with manifests that link every artifact to the inputs it was built from.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from PIL import Image, ImageDraw

from cascade.anomaly_metrics import AnomalyVector, CascadeSequence, TerminalReason
from cascade.simulator import GroundTruthSet
from config import ARTIFACT_ENCODING, EXPORT_CELL_SIZE, MAX_IMAGE_DIMENSION
from errors import CorruptArtifact, MissingArtifact
from grid.case_parser import case_to_json, load_case
from grid.grid_case import GridCase
from grid.line_limits import LineLimits
from learning.causal_learn import CausalModel, CausalModelSet
from learning.dataset_gen import ObservationalDataset
from prediction.influence_graph import InfluenceGraph

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# Heat map colors (RGB tuples)
COLORS = {
    'background': (255, 255, 255),  # White for zero coefficients
    'positive': (200, 30, 30),      # Red for positive coefficients
    'negative': (30, 60, 200),      # Blue for negative coefficients
    'outline': (220, 220, 220)      # Light grey cell borders
}


def sha256_file(path: PathLike) -> str:
    """Hex SHA-256 digest of a file's bytes."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class RunFileManager:
    """
    Handles all file I/O for one run directory.

    Layout under the run directory:
        case.json, limits.json
        datasets/dataset_k{k}.npy (+ .json sidecar), datasets/manifest.json
        models/model_k{k}.npy, models/manifest.json
        models/influence_graph.npy, models/influence_graph.json
        ground_truth/*.jsonl (+ .json sidecar)
        predictions/*.json
        evaluation/*.csv, evaluation/report.json, evaluation/report.txt
    """

    def __init__(self, root: PathLike) -> None:
        """
        Args:
            root: Run output directory (created on first write)
        """
        self.root = Path(root)

    # ============================
    # Helpers
    # ============================

    def path(self, *parts: str) -> Path:
        return self.root.joinpath(*parts)

    def _require(self, path: Path, producer: str) -> Path:
        if not path.exists():
            raise MissingArtifact(str(path), producer)
        return path

    @staticmethod
    def write_json(path: Path, payload: Any) -> Path:
        """
        Write deterministic JSON (sorted keys, two-space indent).

        Raises:
            IOError: If file writing fails
        """
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                            encoding=ARTIFACT_ENCODING)
        except OSError as e:
            raise IOError(f"Failed to write {path}: {e}")
        return path

    @staticmethod
    def read_json(path: Path) -> Any:
        """
        Read a JSON artifact.

        Raises:
            CorruptArtifact: If the file is not valid JSON
        """
        try:
            return json.loads(path.read_text(encoding=ARTIFACT_ENCODING))
        except json.JSONDecodeError as e:
            raise CorruptArtifact(f"Invalid JSON in {path}: {e}")

    @staticmethod
    def _write_array(path: Path, array: np.ndarray) -> str:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            np.save(path, np.ascontiguousarray(array), allow_pickle=False)
        except OSError as e:
            raise IOError(f"Failed to write {path}: {e}")
        return sha256_file(path)

    # ============================
    # Case and limits
    # ============================

    def save_case(self, case: GridCase) -> Path:
        """Write the JSON mirror of the case."""
        path = self.path("case.json")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(case_to_json(case) + "\n", encoding=ARTIFACT_ENCODING)
        return path

    def load_case(self) -> GridCase:
        return load_case(self._require(self.path("case.json"), "gen-data"))

    def save_limits(self, limits: LineLimits, alpha: float, floor: float) -> Path:
        payload = {"alpha": alpha, "floor": floor, "p_max": [float(v) for v in limits.p_max]}
        return self.write_json(self.path("limits.json"), payload)

    def load_limits(self) -> LineLimits:
        payload = self.read_json(self._require(self.path("limits.json"), "gen-data"))
        return LineLimits(np.asarray(payload["p_max"], dtype=float))

    # ============================
    # Observational datasets
    # ============================

    def save_datasets(self, datasets: Dict[int, ObservationalDataset],
                      profile_info: Dict[str, Any]) -> Path:
        """
        Write one .npy file per dataset plus a JSON sidecar, and a manifest.

        Args:
            datasets: Mapping of initiating line to dataset
            profile_info: Load profile parameters recorded in the manifest

        Returns:
            Path of the manifest
        """
        entries: Dict[str, Dict[str, Any]] = {}
        lines: List[int] = []
        for k in sorted(datasets):
            dataset = datasets[k]
            lines = list(dataset.lines)
            array_path = self.path("datasets", f"dataset_k{k}.npy")
            digest = self._write_array(array_path, dataset.samples)
            sidecar = {"initiating_line": k, "lines": lines, "rows": dataset.n_rows,
                       "dropped": dataset.dropped, "sha256": digest}
            self.write_json(array_path.with_suffix(".json"), sidecar)
            entries[str(k)] = {"file": array_path.name, "sha256": digest,
                               "rows": dataset.n_rows, "dropped": dataset.dropped}

        manifest = {"lines": lines, "profile": profile_info, "datasets": entries}
        logger.info("Saved %d datasets to %s", len(entries), self.path("datasets"))
        return self.write_json(self.path("datasets", "manifest.json"), manifest)

    def load_datasets(self) -> Dict[int, ObservationalDataset]:
        """
        Read every dataset listed in the manifest.

        Raises:
            MissingArtifact: If the manifest or a listed file is absent
            CorruptArtifact: If a file no longer matches its recorded digest
        """
        manifest = self.read_json(self._require(self.path("datasets", "manifest.json"), "gen-data"))
        lines = tuple(manifest["lines"])
        datasets: Dict[int, ObservationalDataset] = {}
        for key, entry in manifest["datasets"].items():
            array_path = self._require(self.path("datasets", entry["file"]), "gen-data")
            if sha256_file(array_path) != entry["sha256"]:
                raise CorruptArtifact(f"Dataset {array_path} does not match its manifest digest")
            samples = np.load(array_path, allow_pickle=False)
            datasets[int(key)] = ObservationalDataset(int(key), samples, lines, entry["dropped"])
        return datasets

    def dataset_digests(self) -> Dict[int, str]:
        manifest = self.read_json(self._require(self.path("datasets", "manifest.json"), "gen-data"))
        return {int(k): entry["sha256"] for k, entry in manifest["datasets"].items()}

    # ============================
    # Causal models
    # ============================

    def save_models(self, models: CausalModelSet,
                    dataset_digests: Optional[Dict[int, str]] = None) -> Path:
        """
        Write one .npy file per learned matrix and a manifest linking each
        model to the digest of the dataset it was learned from.
        """
        dataset_digests = dataset_digests or {}
        entries: Dict[str, Dict[str, Any]] = {}
        tau, seed = None, None
        for k in models:
            model = models[k]
            tau, seed = model.tau, model.seed
            array_path = self.path("models", f"model_k{k}.npy")
            digest = self._write_array(array_path, model.b)
            entries[str(k)] = {"file": array_path.name, "sha256": digest,
                               "dataset_sha256": dataset_digests.get(k),
                               "non_gaussianity": model.non_gaussianity}

        manifest = {"lines": list(models.lines), "tau": tau, "seed": seed, "models": entries}
        logger.info("Saved %d causal models to %s", len(entries), self.path("models"))
        return self.write_json(self.path("models", "manifest.json"), manifest)

    def load_models(self) -> CausalModelSet:
        """
        Read every causal model listed in the manifest.

        Raises:
            MissingArtifact: If the manifest or a listed file is absent
            CorruptArtifact: If a matrix no longer matches its recorded digest
        """
        manifest = self.read_json(self._require(self.path("models", "manifest.json"), "learn"))
        lines = tuple(manifest["lines"])
        models: Dict[int, CausalModel] = {}
        for key, entry in manifest["models"].items():
            array_path = self._require(self.path("models", entry["file"]), "learn")
            if sha256_file(array_path) != entry["sha256"]:
                raise CorruptArtifact(f"Model {array_path} does not match its manifest digest")
            b = np.load(array_path, allow_pickle=False)
            models[int(key)] = CausalModel(b, int(key), manifest["tau"], lines,
                                           entry["non_gaussianity"], manifest["seed"])
        return CausalModelSet(models, lines)

    def save_influence_graph(self, graph: InfluenceGraph, corpus_info: Dict[str, Any]) -> Path:
        array_path = self.path("models", "influence_graph.npy")
        digest = self._write_array(array_path, graph.counts)
        manifest = {"file": array_path.name, "sha256": digest, "lines": list(graph.lines),
                    "corpus": corpus_info}
        return self.write_json(self.path("models", "influence_graph.json"), manifest)

    def load_influence_graph(self) -> InfluenceGraph:
        manifest = self.read_json(self._require(self.path("models", "influence_graph.json"), "learn"))
        array_path = self._require(self.path("models", manifest["file"]), "learn")
        if sha256_file(array_path) != manifest["sha256"]:
            raise CorruptArtifact(f"Influence graph {array_path} does not match its manifest digest")
        counts = np.load(array_path, allow_pickle=False)
        return InfluenceGraph(counts, tuple(manifest["lines"]))

    # ============================
    # Cascade sets
    # ============================

    def save_cascades(self, name: str, cascades: GroundTruthSet,
                      include_anomalies: bool = True) -> Path:
        """
        Write a cascade set as JSON lines plus a sidecar.

        Each line holds `lines`, `cost`, `terminal_reason` and, when
        include_anomalies is set, `stage_anomalies` (one list per stage).

        Returns:
            Path of the .jsonl file
        """
        path = self.path("ground_truth", f"{name}.jsonl")
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            with open(path, "w", encoding=ARTIFACT_ENCODING) as f:
                for seq in cascades:
                    record: Dict[str, Any] = {"lines": list(seq.lines), "cost": seq.cost,
                                              "terminal_reason": seq.terminal_reason.value}
                    if include_anomalies:
                        record["stage_anomalies"] = [[float(v) for v in a.s] for a in seq.anomalies]
                    f.write(json.dumps(record, sort_keys=True) + "\n")
        except OSError as e:
            raise IOError(f"Failed to write cascade file {path}: {e}")

        sidecar = {"count": len(cascades), "horizon": cascades.horizon, "case": cascades.case_id,
                   "load_scale": cascades.load_scale, "flow_model": cascades.flow_model,
                   "sha256": sha256_file(path)}
        self.write_json(path.with_suffix(".json"), sidecar)
        logger.info("Saved %d cascades to %s", len(cascades), path)
        return path

    def load_cascades(self, name: str, producer: str = "ground-truth") -> GroundTruthSet:
        """
        Read a cascade set written by save_cascades.

        Raises:
            MissingArtifact: If the set has not been produced
            CorruptArtifact: If a line of the file is corrupted
        """
        path = self._require(self.path("ground_truth", f"{name}.jsonl"), producer)
        sidecar = self.read_json(self._require(path.with_suffix(".json"), producer))
        sequences: List[CascadeSequence] = []
        with open(path, "r", encoding=ARTIFACT_ENCODING) as f:
            for line_num, text in enumerate(f, start=1):
                if not text.strip():
                    continue
                try:
                    record = json.loads(text)
                    anomalies = tuple(
                        AnomalyVector(np.asarray(s, dtype=float), stage)
                        for stage, s in enumerate(record.get("stage_anomalies", []), start=1)
                    )
                    sequences.append(CascadeSequence(tuple(record["lines"]), anomalies,
                                                     TerminalReason(record["terminal_reason"]),
                                                     float(record["cost"])))
                except (KeyError, ValueError) as e:
                    raise CorruptArtifact(f"Line {line_num} of {path} is not a cascade record: {e}")
        return GroundTruthSet(tuple(sequences), sidecar["horizon"], sidecar["case"],
                              sidecar["load_scale"], sidecar["flow_model"])

    def has_cascades(self, name: str) -> bool:
        return self.path("ground_truth", f"{name}.jsonl").exists()

    # ============================
    # Image export
    # ============================

    @staticmethod
    def export_matrix_image(b: np.ndarray, path: PathLike, cell_size: int = EXPORT_CELL_SIZE) -> Path:
        """
        Export an interaction matrix as a PNG heat map.

        Red cells are positive coefficients, blue cells negative, with
        intensity proportional to |b| relative to the largest entry.

        Args:
            b: Square matrix
            path: Destination file
            cell_size: Side of one cell in pixels

        Returns:
            Path of the written image

        Raises:
            ValueError: If the matrix is not square or the image would be too large
            IOError: If image saving fails
        """
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError(f"Heat map needs a square matrix, got shape {b.shape}")
        size = b.shape[0] * cell_size
        if size > MAX_IMAGE_DIMENSION:
            raise ValueError(
                f"Image dimensions ({size}x{size}) exceed "
                f"maximum allowed ({MAX_IMAGE_DIMENSION}x{MAX_IMAGE_DIMENSION})"
            )

        img = Image.new('RGB', (size, size), COLORS['background'])
        draw = ImageDraw.Draw(img)
        peak = float(np.abs(b).max()) or 1.0
        for i in range(b.shape[0]):
            for j in range(b.shape[1]):
                value = float(b[i, j])
                # Blend from white toward the sign color
                weight = abs(value) / peak
                target = COLORS['positive'] if value > 0 else COLORS['negative']
                color = tuple(int(round(bg + weight * (t - bg)))
                              for bg, t in zip(COLORS['background'], target))
                x1, y1 = j * cell_size, i * cell_size
                draw.rectangle([x1, y1, x1 + cell_size, y1 + cell_size],
                               fill=color, outline=COLORS['outline'])

        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            img.save(path)
        except OSError as e:
            raise IOError(f"Failed to save image to {path}: {e}")
        return path
