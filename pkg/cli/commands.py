"""
Command-line pipeline driver.

Subcommands run one pipeline stage each and persist their outputs under the
run directory, so later stages (and re-runs) read artifacts instead of
hidden state:

    gen-data      observational datasets for every viable initiating line
    learn         causal models, stochastic DC corpus and influence graph
    ground-truth  enumerated overload cascades at every configured load scale
    worst-case    every no-repeat sequence of the horizon length
    predict       next-failure predictions after a given failure sequence
    cci           costliest predicted cascades at one kappa
    evaluate      precision, regret, candidate counts and worst-case tables

Exit codes: 0 on success, 1 on a validation error, 2 on a compute failure.
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from cascade.simulator import (GroundTruthSet, enumerate_ground_truth, enumerate_worst_case,
                               sample_stochastic_cascades)
from cli.logging_setup import setup_logging
from cli.run_config import RunConfig
from errors import ComputeError, ConfigError, PartialFailure, ValidationError
from evaluation.evaluator import PredictorEvaluator
from grid.case_parser import load_case
from grid.grid_case import GridCase
from grid.line_limits import LineLimits, assign_limits
from learning.causal_learn import learn_model_set
from learning.dataset_gen import generate_all_observational, make_load_profile
from powerflow.ac_solver import solve_ac
from powerflow.topology import LineSpace
from prediction.base_predictor import BasePredictor, CriticalCascades, PredictionSet
from prediction.causal_path import CausalPathPredictor
from prediction.influence_graph import InfluenceGraphPredictor, train_ig
from prediction.random_predictor import RandomPredictor
from storage.file_manager import RunFileManager, sha256_file

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_COMPUTE = 2

IG_CORPUS = "ig_training"


class _ArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors surface as validation errors."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigError(message)


def ground_truth_name(load_scale: float) -> str:
    return f"ground_truth_load{load_scale:.2f}"


def worst_case_name(horizon: int) -> str:
    return f"worst_case_M{horizon}"


# ============================
# Shared setup
# ============================

def prepare_grid(cfg: RunConfig, files: RunFileManager) -> Tuple[GridCase, LineLimits, LineSpace]:
    """
    Load the case, assign limits from its base AC flow and persist both.

    Returns:
        (case, limits, viable line space)
    """
    case = load_case(cfg.case_path)
    limits = assign_limits(case, solve_ac(case), cfg.alpha, cfg.limit_floor)
    lines = LineSpace.from_case(case)
    files.save_case(case)
    files.save_limits(limits, cfg.alpha, cfg.limit_floor)
    logger.info("%s: %d lines, %d viable", case.name, case.n_lines, len(lines))
    return case, limits, lines


def load_predictors(cfg: RunConfig, files: RunFileManager) -> List[BasePredictor]:
    """Causal and influence graph predictors from persisted models."""
    models = files.load_models()
    graph = files.load_influence_graph()
    return [CausalPathPredictor(models, cfg.max_path_len), InfluenceGraphPredictor(graph)]


def save_timing(files: RunFileManager, command: str, rows: Sequence[Dict[str, object]]) -> Path:
    """Write wall-clock timings of a command to timings/<command>.csv."""
    path = files.path("timings", f"{command}.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(list(rows)).to_csv(path, index=False, float_format="%.6f")
    return path


def _prediction_payload(prediction: PredictionSet) -> Dict[str, object]:
    return {"ranked": [[line, score] for line, score in prediction.ranked],
            "selected": list(prediction.selected), "all_zero": prediction.all_zero}


def _cci_payload(result: CriticalCascades) -> Dict[str, object]:
    return {"n_candidates": result.n_candidates, "short": result.short,
            "top": [{"lines": list(seq.lines), "cost": seq.cost,
                     "terminal_reason": seq.terminal_reason.value} for seq in result.top]}


# ============================
# Subcommands
# ============================

def cmd_gen_data(cfg: RunConfig, files: RunFileManager, args: argparse.Namespace) -> int:
    """Generate and persist one observational dataset per viable initiating line."""
    start = time.perf_counter()
    case, limits, lines = prepare_grid(cfg, files)
    profile = make_load_profile(case, cfg.steps, cfg.lo, cfg.hi, cfg.kernel_window, cfg.seed)
    profile_info = {"steps": cfg.steps, "lo": cfg.lo, "hi": cfg.hi, "kernel_window": cfg.kernel_window,
                    "seed": cfg.seed, "load_bus_ids": list(profile.load_bus_ids)}
    try:
        datasets = generate_all_observational(case, limits, profile, lines, cfg.n_jobs,
                                              cfg.min_rows_per_line)
    except PartialFailure as e:
        if e.result:
            files.save_datasets(e.result, profile_info)
        raise
    manifest = files.save_datasets(datasets, profile_info)
    save_timing(files, "gen-data", [{"stage": "gen-data", "seconds": time.perf_counter() - start}])
    print(f"Generated {len(datasets)} datasets for {case.name} -> {manifest}")
    return EXIT_OK


def cmd_learn(cfg: RunConfig, files: RunFileManager, args: argparse.Namespace) -> int:
    """Learn the causal models, sample the DC corpus and train the influence graph."""
    datasets = files.load_datasets()
    digests = files.dataset_digests()
    case, limits, lines = prepare_grid(cfg, files)

    learn_start = time.perf_counter()
    partial: Optional[PartialFailure] = None
    try:
        models = learn_model_set(datasets, cfg.tau, cfg.seed, cfg.n_jobs)
    except PartialFailure as e:
        partial, models = e, e.result
    learn_seconds = time.perf_counter() - learn_start
    files.save_models(models, digests)
    if cfg.export_images:
        for k in models:
            files.export_matrix_image(models[k].b, files.path("models", f"model_k{k}.png"))

    ig_start = time.perf_counter()
    corpus = sample_stochastic_cascades(case, limits, cfg.horizon, cfg.ig_sequences, cfg.seed,
                                        lines, (cfg.lo, cfg.hi))
    corpus_path = files.save_cascades(IG_CORPUS, corpus, include_anomalies=False)
    graph = train_ig(corpus, lines.lines)
    files.save_influence_graph(graph, {"file": corpus_path.name, "sha256": sha256_file(corpus_path),
                                       "count": len(corpus), "seed": cfg.seed})
    save_timing(files, "learn", [
        {"stage": "causal_models", "seconds": learn_seconds},
        {"stage": "influence_graph", "seconds": time.perf_counter() - ig_start},
    ])
    print(f"Learned {len(models)} causal models and an influence graph "
          f"from {len(corpus)} DC cascades")
    if partial is not None:
        raise partial
    return EXIT_OK


def cmd_ground_truth(cfg: RunConfig, files: RunFileManager, args: argparse.Namespace) -> int:
    """Enumerate overload cascades at every configured load scale."""
    case, limits, lines = prepare_grid(cfg, files)
    timings = []
    for scale in cfg.load_scales:
        start = time.perf_counter()
        truth = enumerate_ground_truth(case, limits, cfg.horizon, scale, lines, cfg.n_jobs)
        path = files.save_cascades(ground_truth_name(scale), truth)
        timings.append({"load_scale": scale, "seconds": time.perf_counter() - start})
        print(f"Load scale {scale:.2f}: {len(truth)} cascades "
              f"({len(truth.multi_stage())} multi-stage) -> {path}")
    save_timing(files, "ground-truth", timings)
    return EXIT_OK


def cmd_worst_case(cfg: RunConfig, files: RunFileManager, args: argparse.Namespace) -> int:
    """Enumerate every no-repeat sequence of the horizon length."""
    case, limits, lines = prepare_grid(cfg, files)
    start = time.perf_counter()
    worst = enumerate_worst_case(case, limits, cfg.horizon, lines, cfg.worst_case_flow,
                                 cfg.load_scales[0], cfg.n_jobs)
    elapsed = time.perf_counter() - start
    files.save_cascades(worst_case_name(cfg.horizon), worst, include_anomalies=False)
    save_timing(files, "worst-case", [{"flow_model": cfg.worst_case_flow, "seconds": elapsed}])
    print(f"Enumerated {len(worst)} sequences of length {cfg.horizon} in {elapsed:.1f}s")
    for seq in worst.top(min(cfg.d, 5)):
        print(f"  {'-'.join(map(str, seq.lines))}: cost {seq.cost:.4f}")
    return EXIT_OK


def cmd_predict(cfg: RunConfig, files: RunFileManager, args: argparse.Namespace) -> int:
    """Print and persist both predictors' next-failure sets after a failure sequence."""
    try:
        failed = tuple(int(item) for item in args.failed.split(",") if item.strip())
    except ValueError:
        raise ConfigError(f"--failed must be a comma-separated list of line numbers, got {args.failed!r}")
    if not failed:
        raise ConfigError("--failed needs at least one line")
    kappa = args.kappa if args.kappa is not None else cfg.reference_kappa

    payload: Dict[str, object] = {"failed": list(failed), "kappa": kappa, "predictors": {}}
    for predictor in load_predictors(cfg, files):
        prediction = predictor.predict(failed, kappa)
        payload["predictors"][predictor.name] = _prediction_payload(prediction)
        flag = " (no candidate scored)" if prediction.all_zero else ""
        print(f"{predictor.name}: {list(prediction.selected)}{flag}")
        for line, score in prediction.ranked[:len(prediction.selected)]:
            print(f"  line {line}: {score:.4f}")

    path = files.write_json(files.path("predictions", f"predict_{'-'.join(map(str, failed))}"
                                                      f"_k{kappa:g}.json"), payload)
    logger.info("Saved predictions to %s", path)
    return EXIT_OK


def cmd_cci(cfg: RunConfig, files: RunFileManager, args: argparse.Namespace) -> int:
    """Identify the costliest predicted cascades at one kappa."""
    kappa = args.kappa if args.kappa is not None else cfg.reference_kappa
    case, limits, _ = prepare_grid(cfg, files)
    payload: Dict[str, object] = {"kappa": kappa, "horizon": cfg.horizon, "d": cfg.d, "predictors": {}}
    timings = []
    for predictor in load_predictors(cfg, files):
        result = predictor.critical_cascades(case, limits, kappa, cfg.horizon, cfg.d)
        payload["predictors"][predictor.name] = _cci_payload(result)
        timings.append({"predictor": predictor.name, "explore": result.explore_seconds,
                        "replay": result.replay_seconds})
        print(f"{predictor.name}: {result.n_candidates} candidates, top {len(result.top)}")
        for seq in result.top[:5]:
            print(f"  {'-'.join(map(str, seq.lines))}: cost {seq.cost:.4f}")

    files.write_json(files.path("predictions", f"cci_k{kappa:g}.json"), payload)
    save_timing(files, "cci", timings)
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, files: RunFileManager, args: argparse.Namespace) -> int:
    """Run every comparison experiment and write the evaluation report."""
    predictors = load_predictors(cfg, files)
    reference, *others = cfg.load_scales
    truth = files.load_cascades(ground_truth_name(reference))
    robustness: Dict[float, GroundTruthSet] = {
        scale: files.load_cascades(ground_truth_name(scale)) for scale in (reference, *others)
    } if others else {}
    worst_name = worst_case_name(cfg.horizon)
    worst = files.load_cascades(worst_name, "worst-case") if files.has_cascades(worst_name) else None
    if worst is None:
        logger.warning("No worst-case enumeration found; run 'worst-case' to fill the table")

    case, limits, lines = prepare_grid(cfg, files)
    evaluator = PredictorEvaluator(case, limits, predictors, truth,
                                   RandomPredictor(lines.lines, cfg.seed), cfg.kappas, cfg.horizon, cfg.d)
    report = evaluator.run(robustness, worst, cfg.reference_kappa, cfg.d_values)
    written = report.save(files)
    print(report.summary_text())
    print(f"Wrote {len(written)} evaluation files to {files.path('evaluation')}")
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "learn": cmd_learn,
    "ground-truth": cmd_ground_truth,
    "worst-case": cmd_worst_case,
    "predict": cmd_predict,
    "cci": cmd_cci,
    "evaluate": cmd_evaluate,
}


# ============================
# Entry point
# ============================

def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="grid-causal",
                             description="Learn line failure interactions and predict cascading outages.")
    parser.add_argument("--config", default=None, help="YAML run configuration")
    parser.add_argument("--out", default=None, help="Run output directory (overrides the config)")
    parser.add_argument("--seed", type=int, default=None, help="Master seed (overrides the config)")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)
    for name, handler in COMMANDS.items():
        command = sub.add_parser(name, help=handler.__doc__)
        if name == "predict":
            command.add_argument("--failed", required=True,
                                 help="Failed lines in order, comma-separated (e.g. 3,5)")
        if name in ("predict", "cci"):
            command.add_argument("--kappa", type=float, default=None,
                                 help="Budget in percent (largest configured kappa if omitted)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Args:
        argv: Arguments without the program name (sys.argv[1:] if None)

    Returns:
        Process exit code
    """
    try:
        args = build_parser().parse_args(argv)
        cfg = RunConfig.from_file(args.config).with_overrides(args.out, args.seed).validate()
        out_dir = Path(cfg.output_dir)
        setup_logging(out_dir, args.verbose)
        logger.info("Running %s (seed=%d, out=%s)", args.command, cfg.seed, out_dir)
        return COMMANDS[args.command](cfg, RunFileManager(out_dir), args)
    except PartialFailure as e:
        for line, message in sorted(e.failures.items()):
            print(f"line {line}: {message}", file=sys.stderr)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_COMPUTE
    except (ValidationError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except ComputeError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_COMPUTE
