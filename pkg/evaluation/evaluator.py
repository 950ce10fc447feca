"""
Predictor Comparison

Compares the causal, influence graph and random predictors on the same
ground truth and generates:
- Precision versus kappa (stagewise hit rate over every multi-stage truth sequence)
- Regret versus kappa and versus d for critical cascade identification
- Candidate counts against the N * ceil(N * kappa)^(M-1) bound
- Robustness of precision across load scales
- Worst-case top sequences from exhaustive enumeration and from each predictor
- Wall-clock timings and a text comparison report
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from cascade.anomaly_metrics import CascadeSequence, precision, regret
from cascade.flow_replay import FlowReplayer
from cascade.simulator import GroundTruthSet
from config import HORIZON, KAPPA_VALUES, TOP_D
from errors import EmptyTruth, UnknownInitiator
from grid.grid_case import GridCase
from grid.line_limits import LineLimits
from powerflow.topology import LineSpace
from prediction.base_predictor import BasePredictor, CriticalCascades, selection_budget
from prediction.random_predictor import random_precision_expectation
from storage.file_manager import RunFileManager

logger = logging.getLogger(__name__)


@dataclass
class EvaluationReport:
    """
    Tables produced by one evaluation run.

    Every table except `timings` is a pure function of the persisted
    artifacts and the run configuration.

    Attributes:
        precision: Mean precision per kappa and predictor
        regret: Regret of the top-d identified sequences per kappa and predictor
        candidates: Candidate set sizes per kappa and predictor, with the branching bound
        regret_by_d: Regret at a fixed kappa for growing d
        robustness: Causal precision per load scale and kappa
        worst_case: Costliest sequences from enumeration and from each predictor
        timings: Wall-clock seconds per stage
    """

    precision: pd.DataFrame
    regret: pd.DataFrame
    candidates: pd.DataFrame
    regret_by_d: pd.DataFrame = field(default_factory=pd.DataFrame)
    robustness: pd.DataFrame = field(default_factory=pd.DataFrame)
    worst_case: pd.DataFrame = field(default_factory=pd.DataFrame)
    timings: pd.DataFrame = field(default_factory=pd.DataFrame)

    def tables(self) -> Dict[str, pd.DataFrame]:
        """Deterministic tables keyed by file stem."""
        return {
            "precision": self.precision,
            "regret": self.regret,
            "candidates": self.candidates,
            "regret_by_d": self.regret_by_d,
            "robustness": self.robustness,
            "worst_case": self.worst_case,
        }

    def save(self, files: RunFileManager) -> List[Path]:
        """
        Write one CSV per table, report.json, report.txt and timings.csv.

        Returns:
            Paths of the written files
        """
        out_dir = files.path("evaluation")
        out_dir.mkdir(parents=True, exist_ok=True)
        written: List[Path] = []
        for stem, table in self.tables().items():
            path = out_dir / f"{stem}.csv"
            table.to_csv(path, index=False, float_format="%.10g")
            written.append(path)

        payload = {stem: table.to_dict(orient="records") for stem, table in self.tables().items()}
        written.append(files.write_json(out_dir / "report.json", payload))

        report_path = out_dir / "report.txt"
        report_path.write_text(self.summary_text(), encoding="utf-8")
        written.append(report_path)

        timings_path = out_dir / "timings.csv"
        self.timings.to_csv(timings_path, index=False, float_format="%.6f")
        written.append(timings_path)
        return written

    def summary_text(self) -> str:
        """Plain-text comparison report."""
        sections = [
            ("PRECISION VS KAPPA", self.precision),
            ("REGRET VS KAPPA", self.regret),
            ("CANDIDATE SEQUENCES", self.candidates),
            ("REGRET VS D", self.regret_by_d),
            ("ROBUSTNESS ACROSS LOAD SCALES", self.robustness),
            ("COSTLIEST SEQUENCES", self.worst_case),
        ]
        lines = ["=" * 80, "PREDICTOR COMPARISON REPORT", "=" * 80, ""]
        for title, table in sections:
            if table.empty:
                continue
            lines.append(title)
            lines.append("-" * 80)
            lines.append(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
            lines.append("")
        return "\n".join(lines)


class PredictorEvaluator:
    """
    Run every comparison experiment over one ground-truth set.

    Attributes:
        case: The network at base loading
        limits: Per-line flow limits
        predictors: Predictors to compare, keyed by name
        random_predictor: Uniform selection baseline for the precision curve
        ground_truth: Enumerated cascades at base loading
        kappas: Budgets swept
        horizon: Exploration depth M
        d: Number of costliest sequences compared
    """

    def __init__(self, case: GridCase, limits: LineLimits, predictors: Sequence[BasePredictor],
                 ground_truth: GroundTruthSet, random_predictor: Optional[BasePredictor] = None,
                 kappas: Sequence[float] = KAPPA_VALUES, horizon: int = HORIZON,
                 d: int = TOP_D) -> None:
        if not predictors:
            raise ValueError("At least one predictor is required")
        self.case = case
        self.limits = limits
        self.predictors = {p.name: p for p in predictors}
        self.random_predictor = random_predictor
        self.ground_truth = ground_truth
        self.kappas = tuple(kappas)
        self.horizon = horizon
        self.d = d
        self.lines = LineSpace(predictors[0].lines, case.n_lines)
        self._replayer: Optional[FlowReplayer] = None
        self._cci: Dict[Tuple[str, float], CriticalCascades] = {}
        self._timings: List[Dict[str, object]] = []

    # ============================
    # Precision
    # ============================

    def mean_precision(self, predictor: BasePredictor, kappa: float,
                       truth: Optional[GroundTruthSet] = None) -> float:
        """
        Mean stagewise precision of a predictor along every multi-stage truth sequence.

        The predictor is queried with each realized prefix U_1..U_m and its
        selection is compared with U_{m+1}. A latest failure the predictor
        knows nothing about counts as an empty prediction.

        Raises:
            EmptyTruth: If no truth sequence has more than one stage
        """
        sequences = (truth or self.ground_truth).multi_stage()
        if not sequences:
            raise EmptyTruth("Ground truth has no multi-stage sequence to score")
        scores = [precision(self._stage_predictions(predictor, seq, kappa), seq) for seq in sequences]
        return float(np.mean(scores))

    def _stage_predictions(self, predictor: BasePredictor, seq: CascadeSequence,
                           kappa: float) -> List[Tuple[int, ...]]:
        predictions = []
        for m in range(1, len(seq)):
            try:
                predictions.append(predictor.predict(seq.lines[:m], kappa).selected)
            except UnknownInitiator:
                predictions.append(())
        return predictions

    def expected_random_precision(self, kappa: float,
                                  truth: Optional[GroundTruthSet] = None) -> float:
        """Closed-form precision of uniform selection averaged like mean_precision."""
        n = len(self.lines)
        per_sequence = [
            np.mean([random_precision_expectation(n, kappa, m) for m in range(1, len(seq))])
            for seq in (truth or self.ground_truth).multi_stage()
        ]
        return float(np.mean(per_sequence))

    def precision_table(self) -> pd.DataFrame:
        """
        Precision versus kappa for every predictor.

        Columns: kappa, one column per predictor, random (measured when a
        random predictor is set) and random_expected.
        """
        rows = []
        for kappa in self.kappas:
            row: Dict[str, float] = {"kappa": kappa}
            for name, predictor in self.predictors.items():
                start = time.perf_counter()
                row[name] = self.mean_precision(predictor, kappa)
                self._record(name, "precision", kappa, time.perf_counter() - start)
            if self.random_predictor is not None:
                row["random"] = self.mean_precision(self.random_predictor, kappa)
            row["random_expected"] = self.expected_random_precision(kappa)
            rows.append(row)
            logger.info("Precision at kappa=%.1f: %s", kappa,
                        ", ".join(f"{k}={v:.3f}" for k, v in row.items() if k != "kappa"))
        return pd.DataFrame(rows)

    def robustness_table(self, truths: Dict[float, GroundTruthSet],
                         predictor_name: str = "causal") -> pd.DataFrame:
        """
        Precision of one predictor against ground truth enumerated at other load scales.

        Args:
            truths: Ground truth per load scale
            predictor_name: Predictor evaluated

        Returns:
            Rows of (load_scale, kappa, n_sequences, precision)
        """
        predictor = self.predictors[predictor_name]
        rows = []
        for scale in sorted(truths):
            truth = truths[scale]
            for kappa in self.kappas:
                rows.append({"load_scale": scale, "kappa": kappa, "n_sequences": len(truth),
                             "precision": self.mean_precision(predictor, kappa, truth)})
        return pd.DataFrame(rows)

    # ============================
    # Critical cascade identification
    # ============================

    @property
    def replayer(self) -> FlowReplayer:
        """AC replayer shared by every critical cascade search."""
        if self._replayer is None:
            self._replayer = FlowReplayer(self.case, self.limits, self.lines, "ac",
                                          self.ground_truth.load_scale)
        return self._replayer

    def critical(self, name: str, kappa: float, d: Optional[int] = None) -> CriticalCascades:
        """Critical cascades of a predictor, cached per (predictor, kappa) at the largest d used."""
        d = d or self.d
        key = (name, kappa)
        cached = self._cci.get(key)
        if cached is None or (len(cached.top) < d and not cached.short):
            cached = self.predictors[name].critical_cascades(
                self.case, self.limits, kappa, self.horizon, d,
                self.ground_truth.load_scale, self.replayer)
            self._cci[key] = cached
            self._record(name, "explore", kappa, cached.explore_seconds)
            self._record(name, "replay", kappa, cached.replay_seconds)
        return cached

    def regret_table(self) -> pd.DataFrame:
        """Regret of each predictor's top-d against the d costliest truth sequences, per kappa."""
        truth_top = self.ground_truth.top(self.d)
        rows = []
        for kappa in self.kappas:
            row: Dict[str, float] = {"kappa": kappa}
            for name in self.predictors:
                row[name] = regret(self.critical(name, kappa).top[: self.d], truth_top)
            rows.append(row)
        return pd.DataFrame(rows)

    def candidate_table(self) -> pd.DataFrame:
        """Candidate set sizes per kappa with the N * ceil(N * kappa)^(M-1) bound."""
        n = len(self.lines)
        rows = []
        for kappa in self.kappas:
            row: Dict[str, float] = {"kappa": kappa}
            for name in self.predictors:
                row[name] = self.critical(name, kappa).n_candidates
            row["bound"] = n * selection_budget(n, kappa) ** (self.horizon - 1)
            rows.append(row)
        return pd.DataFrame(rows)

    def regret_by_d_table(self, kappa: float, d_values: Sequence[int]) -> pd.DataFrame:
        """Regret at one kappa for every d in d_values."""
        d_max = max(d_values)
        truth_sorted = self.ground_truth.top(d_max)
        rows = []
        for d in sorted(d_values):
            row: Dict[str, float] = {"d": d}
            for name in self.predictors:
                top = self.critical(name, kappa, d_max).top
                row[name] = regret(top[:d], truth_sorted[:d])
            rows.append(row)
        return pd.DataFrame(rows)

    def worst_case_table(self, kappa: float, worst_case: Optional[GroundTruthSet] = None,
                         d: int = 1) -> pd.DataFrame:
        """
        The d costliest sequences found by exhaustive enumeration and by each predictor.

        Returns:
            Rows of (source, rank, lines, cost)
        """
        rows = []
        sources: List[Tuple[str, Sequence[CascadeSequence]]] = []
        if worst_case is not None:
            sources.append(("enumeration", worst_case.top(d)))
        for name in self.predictors:
            sources.append((name, self.critical(name, kappa, max(d, self.d)).top[:d]))
        for source, top in sources:
            for rank, seq in enumerate(top, start=1):
                rows.append({"source": source, "rank": rank,
                             "lines": "-".join(str(line) for line in seq.lines), "cost": seq.cost})
        return pd.DataFrame(rows)

    # ============================
    # Full run
    # ============================

    def run(self, robustness_truths: Optional[Dict[float, GroundTruthSet]] = None,
            worst_case: Optional[GroundTruthSet] = None,
            regret_kappa: Optional[float] = None,
            d_values: Sequence[int] = (1, 10, 25, 50, 100)) -> EvaluationReport:
        """
        Run every experiment.

        Args:
            robustness_truths: Ground truth per extra load scale (skipped if None)
            worst_case: Exhaustive enumeration used for the costliest-sequence table
            regret_kappa: Kappa of the regret-versus-d curve (largest swept kappa if None)
            d_values: d values of the regret-versus-d curve

        Returns:
            EvaluationReport with every table filled
        """
        logger.info("Evaluating %s over %d truth sequences", ", ".join(self.predictors),
                    len(self.ground_truth))
        regret_kappa = regret_kappa if regret_kappa is not None else max(self.kappas)

        report = EvaluationReport(
            precision=self.precision_table(),
            regret=self.regret_table(),
            candidates=self.candidate_table(),
        )
        report.regret_by_d = self.regret_by_d_table(regret_kappa, d_values)
        if robustness_truths:
            report.robustness = self.robustness_table(robustness_truths)
        report.worst_case = self.worst_case_table(regret_kappa, worst_case)
        report.timings = pd.DataFrame(self._timings, columns=["predictor", "stage", "kappa", "seconds"])
        return report

    def _record(self, predictor: str, stage: str, kappa: float, seconds: float) -> None:
        self._timings.append({"predictor": predictor, "stage": stage, "kappa": kappa,
                              "seconds": seconds})
