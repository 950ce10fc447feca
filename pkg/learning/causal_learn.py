"""
Cyclic causal discovery.
Recovers the line interaction matrix B of the linear model S = B·S + e from
observational anomaly data: sparse ICA, best row assignment, row scaling,
then B = I - W*.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Tuple, Union

import networkx as nx
import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import linear_sum_assignment
from scipy.stats import kurtosis
from sklearn.decomposition import FastICA
from sklearn.exceptions import ConvergenceWarning

from config import (ASSIGNMENT_GUARD, ICA_MAX_ITER, ICA_TOLERANCE, N_JOBS, NON_GAUSSIANITY_MIN,
                    SPARSITY_TAU, ZERO_DIAGONAL_GUARD)
from errors import ComputeError, NonConvergence, PartialFailure, SingularData, ZeroDiagonal
from learning.dataset_gen import ObservationalDataset

logger = logging.getLogger(__name__)

DataLike = Union[ObservationalDataset, np.ndarray]


@dataclass(frozen=True, eq=False)
class CausalModel:
    """
    Learned interaction matrix for one initiating outage.

    B[i, j] != 0 means an edge from column j to column i with that coefficient.

    Attributes:
        b: N x N coefficients with zero diagonal
        initiating_line: Line k whose dataset the model was learned from
        tau: Relative sparsity threshold used
        lines: Line numbers of the rows/columns
        non_gaussianity: Mean |excess kurtosis| of the recovered components
        seed: ICA seed
    """

    b: np.ndarray
    initiating_line: int
    tau: float
    lines: Tuple[int, ...]
    non_gaussianity: float = field(default=float("nan"), compare=False)
    seed: int = 0

    def __post_init__(self) -> None:
        n = len(self.lines)
        if self.b.shape != (n, n):
            raise ValueError(f"Matrix of shape {self.b.shape} does not match {n} lines")
        if not np.all(np.isfinite(self.b)):
            raise ValueError(f"Model for line {self.initiating_line} has non-finite entries")
        if np.any(np.diag(self.b) != 0):
            raise ValueError(f"Model for line {self.initiating_line} has a nonzero diagonal")
        self.b.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.lines)

    def to_graph(self) -> nx.DiGraph:
        """
        Export the learned graph.

        Returns:
            DiGraph over line numbers with an edge j -> i (attribute `weight`)
            for every nonzero B[i, j]
        """
        graph = nx.DiGraph()
        graph.add_nodes_from(self.lines)
        rows, cols = np.nonzero(self.b)
        for i, j in zip(rows, cols):
            graph.add_edge(self.lines[j], self.lines[i], weight=float(self.b[i, j]))
        return graph


@dataclass(frozen=True)
class CausalModelSet:
    """
    One learned model per initiating line.

    Attributes:
        models: Mapping of initiating line to its model
        lines: Line numbers shared by every model
    """

    models: Dict[int, CausalModel]
    lines: Tuple[int, ...]

    def __post_init__(self) -> None:
        for k, model in self.models.items():
            if model.lines != self.lines:
                raise ValueError(f"Model for line {k} is indexed over different lines")

    def __getitem__(self, line: int) -> CausalModel:
        return self.models[line]

    def __contains__(self, line: object) -> bool:
        return line in self.models

    def __len__(self) -> int:
        return len(self.models)

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.models))


# ============================
# Algorithm steps
# ============================

def _as_matrix(data: DataLike) -> np.ndarray:
    samples = data.samples if isinstance(data, ObservationalDataset) else data
    return np.asarray(samples, dtype=float)


def sparse_ica(data: DataLike, n_components: Optional[int] = None, tau: float = SPARSITY_TAU,
               seed: int = 0, max_iter: int = ICA_MAX_ITER, tol: float = ICA_TOLERANCE) -> np.ndarray:
    """
    Estimate a sparse full unmixing matrix.

    Parallel fixed-point ICA (logcosh contrast) runs on whitened data; the
    returned matrix is composed with the whitening so it maps centered data
    to the independent components. Entries below tau times their row's
    largest magnitude are set to zero.

    Args:
        data: Samples of shape (rows, N)
        n_components: Number of components (N if None)
        tau: Relative hard threshold
        seed: ICA random state
        max_iter: Fixed-point iteration cap
        tol: Fixed-point tolerance

    Returns:
        Unmixing matrix of shape (N, N)

    Raises:
        SingularData: If a column is constant or the covariance is rank deficient
        NonConvergence: If the fixed-point iteration hits its cap
    """
    x = _as_matrix(data)
    n = x.shape[1] if n_components is None else n_components
    centered = x - x.mean(axis=0)
    spread = centered.std(axis=0)
    constant = np.flatnonzero(spread <= 1e-12 * max(1.0, float(np.abs(x).max())))
    if constant.size:
        raise SingularData(f"Constant column(s) at position {constant.tolist()}")
    if np.linalg.matrix_rank(centered) < x.shape[1]:
        raise SingularData("Sample covariance is rank deficient")

    ica = FastICA(n_components=n, algorithm="parallel", whiten="unit-variance", fun="logcosh",
                  max_iter=max_iter, tol=tol, random_state=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        ica.fit(centered)
    if ica.n_iter_ >= max_iter:
        raise NonConvergence(f"FastICA did not converge within {max_iter} iterations")

    w = np.array(ica.components_, dtype=float)
    row_max = np.abs(w).max(axis=1, keepdims=True)
    w[np.abs(w) < tau * row_max] = 0.0
    return w


def non_gaussianity_score(data: DataLike, w: np.ndarray) -> float:
    """Mean |excess kurtosis| of the components recovered by w."""
    x = _as_matrix(data)
    components = (x - x.mean(axis=0)) @ w.T
    return float(np.mean(np.abs(kurtosis(components, axis=0, fisher=True))))


def best_assignment(w: np.ndarray, guard: float = ASSIGNMENT_GUARD) -> np.ndarray:
    """
    Row permutation making the diagonal as large as possible.

    Minimizes sum_i 1 / |w[order[i], i]| as a linear assignment problem.

    Args:
        w: Square unmixing matrix
        guard: Floor on |w| so every assignment is feasible

    Returns:
        order such that w[order] is the permuted matrix
    """
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"Assignment needs a square matrix, got shape {w.shape}")
    cost = 1.0 / np.maximum(np.abs(w), guard)
    rows, cols = linear_sum_assignment(cost)
    order = np.empty(len(rows), dtype=int)
    order[cols] = rows
    return order


def rescale_rows(w: np.ndarray, guard: float = ZERO_DIAGONAL_GUARD) -> np.ndarray:
    """
    Divide each row by its diagonal entry.

    Raises:
        ZeroDiagonal: If a diagonal magnitude is below guard
    """
    diagonal = np.diag(w)
    small = np.flatnonzero(np.abs(diagonal) < guard)
    if small.size:
        raise ZeroDiagonal(f"Diagonal entries too small to rescale at rows {small.tolist()}")
    return w / diagonal[:, None]


def learn_model(data: DataLike, tau: float = SPARSITY_TAU, seed: int = 0,
                initiating_line: int = 0, lines: Optional[Tuple[int, ...]] = None,
                max_iter: int = ICA_MAX_ITER) -> CausalModel:
    """
    Learn B from one dataset.

    Args:
        data: ObservationalDataset or raw samples
        tau: Relative sparsity threshold
        seed: ICA random state
        initiating_line: Line recorded on the model (taken from the dataset when given)
        lines: Column line numbers (taken from the dataset when given)
        max_iter: Fixed-point iteration cap

    Returns:
        CausalModel with B = I - W*

    Raises:
        SingularData, NonConvergence, ZeroDiagonal: From the algorithm steps
    """
    if isinstance(data, ObservationalDataset):
        initiating_line, lines = data.initiating_line, data.lines
    x = _as_matrix(data)
    lines = tuple(lines) if lines is not None else tuple(range(1, x.shape[1] + 1))

    w = sparse_ica(x, tau=tau, seed=seed, max_iter=max_iter)
    score = non_gaussianity_score(x, w)
    if score < NON_GAUSSIANITY_MIN:
        logger.warning("Line %d: components look Gaussian (mean |excess kurtosis| %.3f); "
                       "recovered structure may be unreliable", initiating_line, score)

    w_star = rescale_rows(w[best_assignment(w)])
    b = np.eye(len(lines)) - w_star
    np.fill_diagonal(b, 0.0)
    logger.debug("Line %d: learned %d edges", initiating_line, int(np.count_nonzero(b)))
    return CausalModel(b, initiating_line, tau, lines, score, seed)


def _learn_or_report(dataset: ObservationalDataset, tau: float, seed: int):
    try:
        return learn_model(dataset, tau, seed)
    except ComputeError as e:
        return f"{type(e).__name__}: {e}"


def learn_model_set(datasets: Dict[int, ObservationalDataset], tau: float = SPARSITY_TAU,
                    seed: int = 0, n_jobs: int = N_JOBS) -> CausalModelSet:
    """
    Learn one model per initiating line.

    Args:
        datasets: Mapping of line k to its dataset
        tau: Relative sparsity threshold
        seed: ICA random state shared by every line
        n_jobs: Worker processes across lines

    Returns:
        CausalModelSet covering every dataset

    Raises:
        ValueError: If datasets is empty or the datasets use different columns
        PartialFailure: If some lines failed; `result` holds the models that succeeded
    """
    if not datasets:
        raise ValueError("No datasets to learn from")
    keys = sorted(datasets)
    lines = datasets[keys[0]].lines
    if any(datasets[k].lines != lines for k in keys):
        raise ValueError("Datasets are indexed over different lines")

    outcomes = Parallel(n_jobs=n_jobs)(delayed(_learn_or_report)(datasets[k], tau, seed) for k in keys)
    models: Dict[int, CausalModel] = {}
    failures: Dict[int, str] = {}
    for k, outcome in zip(keys, outcomes):
        if isinstance(outcome, CausalModel):
            models[k] = outcome
        else:
            failures[k] = outcome
            logger.error("Learning failed for line %d: %s", k, outcome)

    model_set = CausalModelSet(models, lines)
    logger.info("Learned %d causal models (tau=%.3f, seed=%d)", len(models), tau, seed)
    if failures:
        raise PartialFailure(failures, result=model_set)
    return model_set
