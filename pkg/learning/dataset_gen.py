"""
Observational dataset generation.
Smooth random load profiles crossed with each initiating line outage give
one matrix of anomaly vectors per line.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.ndimage import uniform_filter1d

from cascade.anomaly_metrics import anomaly_index
from config import (KERNEL_WINDOW, MIN_ROWS_PER_LINE, N_JOBS, PROFILE_HIGH, PROFILE_LOW,
                    PROFILE_STEPS)
from errors import Islanded, NonConvergence, PartialFailure, TooFewValidRows
from grid.grid_case import GridCase
from grid.line_limits import LineLimits
from powerflow.ac_solver import solve_ac
from powerflow.flow_state import FlowState
from powerflow.topology import LineSpace

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LoadProfile:
    """
    Per-load demand multipliers over time.

    Attributes:
        scales: Matrix of shape (steps, n_loads); column j scales load bus load_bus_ids[j]
        load_bus_ids: Bus ids the columns refer to
        lo: Lower bound of every multiplier
        hi: Upper bound of every multiplier
        kernel_window: Moving-average width used for smoothing
        seed: Random seed the profile was drawn with
    """

    scales: np.ndarray
    load_bus_ids: Tuple[int, ...]
    lo: float = PROFILE_LOW
    hi: float = PROFILE_HIGH
    kernel_window: int = KERNEL_WINDOW
    seed: int = 0

    def __post_init__(self) -> None:
        if self.scales.ndim != 2 or self.scales.shape[0] < 2:
            raise ValueError("A load profile needs at least 2 steps")
        if self.scales.shape[1] != len(self.load_bus_ids):
            raise ValueError("Profile columns do not match the load buses")
        if np.any(self.scales < self.lo) or np.any(self.scales > self.hi):
            raise ValueError(f"Profile multipliers leave [{self.lo}, {self.hi}]")
        self.scales.setflags(write=False)

    @property
    def steps(self) -> int:
        """Number of load steps."""
        return int(self.scales.shape[0])


@dataclass(frozen=True, eq=False)
class ObservationalDataset:
    """
    Anomaly vectors observed after one initiating outage across a load profile.

    Attributes:
        initiating_line: Line k removed at stage 1
        samples: Matrix of shape (n_rows, N), one anomaly vector per surviving step
        lines: Line numbers of the columns
        dropped: Profile steps whose flows could not be solved
    """

    initiating_line: int
    samples: np.ndarray
    lines: Tuple[int, ...]
    dropped: int = 0

    def __post_init__(self) -> None:
        if self.samples.ndim != 2 or self.samples.shape[1] != len(self.lines):
            raise ValueError(
                f"Samples of shape {self.samples.shape} do not match {len(self.lines)} lines"
            )
        self.samples.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return int(self.samples.shape[0])

    @property
    def n_cols(self) -> int:
        return int(self.samples.shape[1])


def make_load_profile(case: GridCase, steps: int = PROFILE_STEPS, lo: float = PROFILE_LOW,
                      hi: float = PROFILE_HIGH, kernel_window: int = KERNEL_WINDOW,
                      seed: int = 0) -> LoadProfile:
    """
    Draw a smooth random load profile.

    Each load bus gets i.i.d. uniform multipliers in [lo, hi], smoothed over
    time by a centered moving average with clamped edges and re-clipped.

    Args:
        case: Network whose load buses are perturbed
        steps: Number of time steps
        lo: Lowest multiplier
        hi: Highest multiplier
        kernel_window: Moving-average width (1 leaves samples unchanged)
        seed: Random seed

    Returns:
        LoadProfile of shape (steps, number of load buses)

    Raises:
        ValueError: If the window, step count or range is invalid
    """
    if kernel_window < 1 or steps < kernel_window or steps < 2:
        raise ValueError(f"Need steps >= kernel_window >= 1, got steps={steps}, window={kernel_window}")
    if not 0 < lo <= hi:
        raise ValueError(f"Need 0 < lo <= hi, got lo={lo}, hi={hi}")

    rng = np.random.default_rng(seed)
    raw = rng.uniform(lo, hi, size=(steps, len(case.load_bus_ids)))
    smoothed = uniform_filter1d(raw, size=kernel_window, axis=0, mode="nearest")
    return LoadProfile(np.clip(smoothed, lo, hi), case.load_bus_ids, lo, hi, kernel_window, seed)


def solve_profile_bases(case: GridCase, profile: LoadProfile) -> List[Optional[FlowState]]:
    """
    Pre-outage AC flow at every profile step.

    Returns:
        One FlowState per step, None where the solve failed
    """
    bases: List[Optional[FlowState]] = []
    warm = None
    for step in range(profile.steps):
        try:
            state = solve_ac(case.scale_loads(profile.scales[step]), warm_start=warm)
            warm = state.voltages
        except (NonConvergence, Islanded):
            state = None
        bases.append(state)
    return bases


def generate_observational(case: GridCase, limits: LineLimits, k: int, profile: LoadProfile,
                           lines: Optional[LineSpace] = None,
                           bases: Optional[Sequence[Optional[FlowState]]] = None,
                           min_rows_per_line: int = MIN_ROWS_PER_LINE) -> ObservationalDataset:
    """
    Build the observational dataset for one initiating line.

    For every profile step the flow is solved with and without line k; the
    row is the anomaly vector between the two.

    Args:
        case: The network at base loading
        limits: Per-line flow limits
        k: Initiating line
        profile: Load profile
        lines: Column space (non-islanding lines if None)
        bases: Pre-outage states per step, reused across lines when given
        min_rows_per_line: Rows required per column

    Returns:
        ObservationalDataset with one row per solvable step

    Raises:
        ValueError: If k is not a viable line
        TooFewValidRows: If fewer than min_rows_per_line * N rows survive
    """
    lines = lines if lines is not None else LineSpace.from_case(case)
    if k not in lines:
        raise ValueError(f"Line {k} is not a viable initiating line")
    if bases is None:
        bases = solve_profile_bases(case, profile)

    rows: List[np.ndarray] = []
    dropped = 0
    for step in range(profile.steps):
        base = bases[step]
        if base is None:
            dropped += 1
            continue
        try:
            outage = solve_ac(case.scale_loads(profile.scales[step]), {k}, warm_start=base.voltages)
        except (NonConvergence, Islanded):
            dropped += 1
            continue
        rows.append(anomaly_index(outage, base, limits, stage=1, lines=lines).s)

    needed = min_rows_per_line * len(lines)
    if len(rows) < needed:
        raise TooFewValidRows(f"Line {k}: {len(rows)} valid rows, need at least {needed}")
    if dropped:
        logger.warning("Line %d: dropped %d of %d profile steps", k, dropped, profile.steps)

    samples = np.vstack(rows)
    return ObservationalDataset(k, samples, lines.lines, dropped)


def _generate_or_report(case: GridCase, limits: LineLimits, k: int, profile: LoadProfile,
                        lines: LineSpace, bases: Sequence[Optional[FlowState]],
                        min_rows_per_line: int):
    try:
        return generate_observational(case, limits, k, profile, lines, bases, min_rows_per_line)
    except TooFewValidRows as e:
        return str(e)


def generate_all_observational(case: GridCase, limits: LineLimits, profile: LoadProfile,
                               lines: Optional[LineSpace] = None,
                               n_jobs: int = N_JOBS,
                               min_rows_per_line: int = MIN_ROWS_PER_LINE
                               ) -> Dict[int, ObservationalDataset]:
    """
    Build the datasets of every viable initiating line.

    Pre-outage flows are solved once per step and shared across lines.

    Args:
        case: The network at base loading
        limits: Per-line flow limits
        profile: Load profile
        lines: Initiating lines and column space (non-islanding lines if None)
        n_jobs: Worker processes across lines
        min_rows_per_line: Rows required per column

    Returns:
        Mapping of line k to its dataset, in line order

    Raises:
        PartialFailure: If some lines could not be built; `result` holds the rest
    """
    lines = lines if lines is not None else LineSpace.from_case(case)
    bases = solve_profile_bases(case, profile)
    outcomes = Parallel(n_jobs=n_jobs)(
        delayed(_generate_or_report)(case, limits, k, profile, lines, bases, min_rows_per_line)
        for k in lines
    )

    datasets: Dict[int, ObservationalDataset] = {}
    failures: Dict[int, str] = {}
    for k, outcome in zip(lines, outcomes):
        if isinstance(outcome, ObservationalDataset):
            datasets[k] = outcome
        else:
            failures[k] = outcome
    logger.info("Generated %d observational datasets (%d failed)", len(datasets), len(failures))
    if failures:
        raise PartialFailure(failures, result=datasets)
    return datasets
