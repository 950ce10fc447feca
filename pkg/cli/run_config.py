"""
Run configuration.
Reads a YAML file of named sections into a RunConfig; every key that is
not given falls back to the defaults in config.py.
"""

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Optional, Tuple, Union

import yaml

from config import (DEFAULT_CASE_PATH, DEFAULT_OUTPUT_DIR, DEFAULT_SEED, HORIZON,
                    IG_TRAINING_SEQUENCES, KAPPA_VALUES, KERNEL_WINDOW, LIMIT_ALPHA, LIMIT_FLOOR_MW,
                    LOAD_SCALES, MAX_PATH_LENGTH, MIN_ROWS_PER_LINE, N_JOBS, PROFILE_HIGH,
                    PROFILE_LOW, PROFILE_STEPS, SPARSITY_TAU, TOP_D)
from errors import ConfigError

SECTIONS = ("case", "limits", "profile", "lingam", "prediction", "simulation", "baseline", "output")


@dataclass(frozen=True)
class RunConfig:
    """
    Every knob of a pipeline run.

    Attributes:
        case_path: MATPOWER or JSON case file
        alpha: Limit scale on |base flow| for unrated lines
        limit_floor: Smallest assigned limit (MW)
        steps: Load profile length
        lo: Lowest load multiplier
        hi: Highest load multiplier
        kernel_window: Profile smoothing width
        min_rows_per_line: Dataset rows required per column
        tau: Relative sparsity threshold of the unmixing matrix
        seed: Master seed (profile, ICA, stochastic cascades, random baseline)
        kappas: Prediction budgets in percent
        max_path_len: Longest directed path summed by the causal predictor
        horizon: Cascade horizon M
        d: Number of costliest sequences compared
        d_values: d values of the regret-versus-d curve
        regret_kappa: Kappa of the regret-versus-d curve and worst-case table
        load_scales: Load scales for ground truth (the first one is the reference)
        worst_case_flow: Flow model used by the worst-case enumeration
        n_jobs: Worker processes for per-line stages
        ig_sequences: Stochastic DC cascades used to train the influence graph
        output_dir: Run artifact directory
        export_images: Write a PNG heat map for every learned matrix
    """

    case_path: str = DEFAULT_CASE_PATH
    alpha: float = LIMIT_ALPHA
    limit_floor: float = LIMIT_FLOOR_MW
    steps: int = PROFILE_STEPS
    lo: float = PROFILE_LOW
    hi: float = PROFILE_HIGH
    kernel_window: int = KERNEL_WINDOW
    min_rows_per_line: int = MIN_ROWS_PER_LINE
    tau: float = SPARSITY_TAU
    seed: int = DEFAULT_SEED
    kappas: Tuple[float, ...] = KAPPA_VALUES
    max_path_len: int = MAX_PATH_LENGTH
    horizon: int = HORIZON
    d: int = TOP_D
    d_values: Tuple[int, ...] = (1, 10, 25, 50, 100)
    regret_kappa: Optional[float] = None
    load_scales: Tuple[float, ...] = LOAD_SCALES
    worst_case_flow: str = "dc"
    n_jobs: int = N_JOBS
    ig_sequences: int = IG_TRAINING_SEQUENCES
    output_dir: str = DEFAULT_OUTPUT_DIR
    export_images: bool = False

    @classmethod
    def from_file(cls, path: Optional[Union[str, Path]]) -> "RunConfig":
        """
        Load a run configuration.

        Args:
            path: YAML file, or None for all defaults

        Returns:
            RunConfig (not yet validated)

        Raises:
            ConfigError: If the file is missing, unparseable or a value has the wrong type
        """
        if path is None:
            return cls()
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")

        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Cannot parse {path}: {e}")
        if not isinstance(raw, dict) or not all(isinstance(v, dict) for v in raw.values()):
            raise ConfigError(f"{path} must map section names to key-value sections")
        unknown = [str(s) for s in raw if s not in SECTIONS]
        if unknown:
            raise ConfigError(f"Unknown config section(s): {', '.join(unknown)}")

        defaults = cls()

        def get(section: str, key: str, kind: type, fallback: Any) -> Any:
            value = raw.get(section, {}).get(key)
            return fallback if value is None else _coerce(value, kind, f"{section}.{key}")

        try:
            return cls(
                case_path=get("case", "path", str, defaults.case_path),
                alpha=get("limits", "alpha", float, defaults.alpha),
                limit_floor=get("limits", "floor", float, defaults.limit_floor),
                steps=get("profile", "steps", int, defaults.steps),
                lo=get("profile", "lo", float, defaults.lo),
                hi=get("profile", "hi", float, defaults.hi),
                kernel_window=get("profile", "kernel_window", int, defaults.kernel_window),
                min_rows_per_line=get("profile", "min_rows_per_line", int, defaults.min_rows_per_line),
                tau=get("lingam", "tau", float, defaults.tau),
                seed=get("lingam", "seed", int, defaults.seed),
                kappas=get("prediction", "kappas", tuple, defaults.kappas),
                max_path_len=get("prediction", "max_path_len", int, defaults.max_path_len),
                horizon=get("prediction", "horizon", int, defaults.horizon),
                d=get("prediction", "d", int, defaults.d),
                d_values=tuple(_coerce(v, int, "prediction.d_values")
                               for v in get("prediction", "d_values", tuple, defaults.d_values)),
                regret_kappa=get("prediction", "regret_kappa", float, None),
                load_scales=get("simulation", "load_scales", tuple, defaults.load_scales),
                worst_case_flow=get("simulation", "worst_case_flow", str, defaults.worst_case_flow),
                n_jobs=get("simulation", "n_jobs", int, defaults.n_jobs),
                ig_sequences=get("baseline", "sequences", int, defaults.ig_sequences),
                output_dir=get("output", "dir", str, defaults.output_dir),
                export_images=get("output", "export_images", bool, defaults.export_images),
            )
        except ValueError as e:
            raise ConfigError(f"Invalid value in {path}: {e}")

    def with_overrides(self, output_dir: Optional[str] = None,
                       seed: Optional[int] = None) -> "RunConfig":
        """Apply command-line overrides."""
        changes = {}
        if output_dir is not None:
            changes["output_dir"] = output_dir
        if seed is not None:
            changes["seed"] = seed
        return replace(self, **changes)

    def validate(self) -> "RunConfig":
        """
        Check every value before any compute starts.

        Returns:
            self, for chaining

        Raises:
            ConfigError: On the first invalid value
        """
        if not Path(self.case_path).exists():
            raise ConfigError(f"Case file not found: {self.case_path}")
        if not self.kappas or any(not 0 < k <= 100 for k in self.kappas):
            raise ConfigError(f"kappa values must lie in (0, 100], got {self.kappas}")
        if self.regret_kappa is not None and not 0 < self.regret_kappa <= 100:
            raise ConfigError(f"regret_kappa must lie in (0, 100], got {self.regret_kappa}")
        if self.alpha <= 1:
            raise ConfigError(f"alpha must exceed 1, got {self.alpha}")
        if self.limit_floor <= 0:
            raise ConfigError(f"limit floor must be positive, got {self.limit_floor}")
        if not 0 < self.lo <= self.hi:
            raise ConfigError(f"Need 0 < lo <= hi, got lo={self.lo}, hi={self.hi}")
        if not self.steps >= self.kernel_window >= 1:
            raise ConfigError(f"Need steps >= kernel_window >= 1, got {self.steps}, {self.kernel_window}")
        if self.min_rows_per_line < 1:
            raise ConfigError("min_rows_per_line must be at least 1")
        if not 0 <= self.tau < 1:
            raise ConfigError(f"tau must lie in [0, 1), got {self.tau}")
        if self.horizon < 2:
            raise ConfigError(f"horizon must be at least 2, got {self.horizon}")
        if self.d < 1 or not self.d_values or min(self.d_values) < 1:
            raise ConfigError("d and every d value must be at least 1")
        if self.max_path_len < 1:
            raise ConfigError(f"max_path_len must be at least 1, got {self.max_path_len}")
        if not self.load_scales or any(s <= 0 for s in self.load_scales):
            raise ConfigError(f"load scales must be positive, got {self.load_scales}")
        if self.worst_case_flow not in ("ac", "dc"):
            raise ConfigError(f"worst_case_flow must be 'ac' or 'dc', got {self.worst_case_flow}")
        if self.n_jobs < 1:
            raise ConfigError(f"n_jobs must be at least 1, got {self.n_jobs}")
        if self.ig_sequences < 1:
            raise ConfigError("baseline sequences must be at least 1")
        return self

    @property
    def reference_kappa(self) -> float:
        """Kappa used by the regret-versus-d curve and worst-case table."""
        return self.regret_kappa if self.regret_kappa is not None else max(self.kappas)


def _coerce(value: Any, kind: type, key: str) -> Any:
    """Convert one YAML value; lists may also be written as comma-separated text."""
    if kind is tuple:
        items = value.split(",") if isinstance(value, str) else value
        if not isinstance(items, (list, tuple)):
            items = [items]
        return tuple(_coerce(item, float, key) for item in items if str(item).strip())
    if kind is bool:
        if not isinstance(value, bool):
            raise ValueError(f"{key} must be true or false, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ValueError(f"{key} must be an integer, got {value!r}")
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ValueError(f"{key} must be an integer, got {value!r}")
    if kind is float:
        if isinstance(value, bool):
            raise ValueError(f"{key} must be a number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ValueError(f"{key} must be a number, got {value!r}")
    return str(value)
