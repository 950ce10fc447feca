"""
Application configuration settings.
Centralizes all default constants so every experiment knob is auditable in one place.

Values that are tuning choices rather than physics (limit scaling, smoothing window,
sparsity threshold, path cap, profile length) live here and can be overridden
per run from a YAML file (see cli/run_config.py).
"""

# ============================
# Grid Case Configuration
# ============================

# Case file used when a run config does not name one
DEFAULT_CASE_PATH = "cases/case14.m"

# File encoding for case files
CASE_FILE_ENCODING = "utf-8"


# ============================
# Line Limit Configuration
# ============================

# Scale applied to |base flow| when a branch has no RATE_A
LIMIT_ALPHA = 1.3

# Smallest limit assigned to an unrated line (MW)
LIMIT_FLOOR_MW = 1.0


# ============================
# Power Flow Configuration
# ============================

# Newton-Raphson convergence tolerance on the max power mismatch (per unit)
AC_TOLERANCE = 1e-8

# Newton-Raphson iteration cap
AC_MAX_ITERATIONS = 20

# Switch PV buses to PQ when generator reactive limits are violated
ENFORCE_Q_LIMITS = True

# Maximum PV->PQ switching passes per solve
MAX_Q_LIMIT_PASSES = 10


# ============================
# Load Profile Configuration
# ============================

# Number of load steps per profile (20,000 reproduces the full-scale setting)
PROFILE_STEPS = 2000

# Range of per-load scale factors (fraction of base demand)
PROFILE_LOW = 0.90
PROFILE_HIGH = 1.10

# Width of the centered moving-average smoothing kernel
KERNEL_WINDOW = 5

# A dataset needs at least this many rows per column to be learnable
MIN_ROWS_PER_LINE = 10


# ============================
# Causal Learning Configuration
# ============================

# Relative hard threshold applied to each unmixing row (|w| < tau * max|row| -> 0)
SPARSITY_TAU = 0.05

# Fixed-point ICA iteration cap and tolerance
ICA_MAX_ITER = 500
ICA_TOLERANCE = 1e-4

# Floor on |w| when building assignment costs
ASSIGNMENT_GUARD = 1e-12

# Diagonal entries below this magnitude cannot be rescaled
ZERO_DIAGONAL_GUARD = 1e-12

# Mean |excess kurtosis| below this value triggers the identifiability warning
NON_GAUSSIANITY_MIN = 0.5


# ============================
# Prediction Configuration
# ============================

# Prediction budgets swept by the evaluation (percent of lines)
KAPPA_VALUES = (15.0, 20.0, 25.0, 30.0, 35.0, 45.0)

# Longest directed path considered when summing causal effects
MAX_PATH_LENGTH = 3

# Cascade horizon M
HORIZON = 4

# Number of costliest sequences compared by the regret metric
TOP_D = 100

# Healthy tolerance on |s| for multi-level discretization
HEALTHY_TOLERANCE = 1e-9


# ============================
# Baseline Configuration
# ============================

# Stochastic DC cascades used to train the influence graph
IG_TRAINING_SEQUENCES = 10000


# ============================
# Run Configuration
# ============================

# Master seed (profiles, ICA, stochastic cascades, random baseline)
DEFAULT_SEED = 0

# Worker processes for per-line parallel stages (1 = serial)
N_JOBS = 1

# System-wide load scales for ground-truth enumeration (robustness sweep)
LOAD_SCALES = (1.0,)

# Default output directory for run artifacts
DEFAULT_OUTPUT_DIR = "runs/default"


# ============================
# File Configuration
# ============================

# Encoding for every text artifact
ARTIFACT_ENCODING = "utf-8"

# Image export cell size for causal-matrix heat maps (PNG)
EXPORT_CELL_SIZE = 20

# Largest PNG side accepted by the exporter (pixels)
MAX_IMAGE_DIMENSION = 10000


# ============================
# Logging Configuration
# ============================

# Enable/disable the log file handler
ENABLE_LOGGING = True

# Log file name
LOG_FILE = "grid_causal.log"

# Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
LOG_LEVEL = "INFO"
