"""Mean first passage times of finite Markov chains.

All matrices are column-stochastic: ``P[i, j]`` is the probability of moving
from state ``j`` to state ``i`` and ``M[i, j]`` is the mean number of steps
from ``j`` to the first visit of ``i``.

Two independent solvers are provided. ``mfpt_matrix`` uses the fundamental
matrix of an ergodic chain, ``hitting_time`` solves the linear system of an
absorbing chain directly; the pipeline requires them to agree.
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import networkx as nx
import numpy as np
from scipy.linalg import lu_factor, lu_solve, solve

from fusionchain.config import (
    PIVOT_THRESHOLD,
    SOLVER_AGREEMENT_TOL,
    STATIONARY_TOL,
    STOCHASTIC_TOL,
)
from fusionchain.core.markov import TransitionMatrix

logger = logging.getLogger(__name__)

MatrixLike = Union[TransitionMatrix, np.ndarray]


class ChainAssumptionError(ValueError):
    """Raised when a chain violates the assumptions of a solver."""


@dataclass(frozen=True)
class StationaryDistribution:
    """Probability vector with ``P @ pi == pi``."""

    pi: np.ndarray

    def __post_init__(self):
        """Check the vector is a probability distribution."""
        if np.any(self.pi < -STATIONARY_TOL) or abs(self.pi.sum() - 1.0) > STATIONARY_TOL:
            raise ChainAssumptionError("Stationary vector is not a probability distribution.")


@dataclass(frozen=True)
class MfptResult:
    """First passage times of an ergodic chain.

    Attributes:
        M: ``M[i, j]`` mean steps from ``j`` to the first visit of ``i``.
        pi: Stationary distribution of the chain.
        expected_fusions: ``M[target, start]`` when the chain carries both
            indices (0 when they coincide), NaN otherwise.
    """

    M: np.ndarray
    pi: StationaryDistribution
    expected_fusions: float


def _array(P: MatrixLike) -> np.ndarray:
    matrix = P.matrix if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ChainAssumptionError(f"Transition matrix must be square, got shape {matrix.shape}.")
    if not np.allclose(matrix.sum(axis=0), 1.0, rtol=0, atol=STOCHASTIC_TOL):
        raise ChainAssumptionError("Transition matrix columns must sum to 1.")
    return matrix


def support_digraph(P: MatrixLike) -> nx.DiGraph:
    """Directed graph with an arc j -> i for every positive ``P[i, j]``."""
    matrix = P.matrix if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)
    digraph = nx.DiGraph()
    digraph.add_nodes_from(range(matrix.shape[0]))
    rows, cols = np.nonzero(matrix > 0)
    digraph.add_edges_from(zip(cols.tolist(), rows.tolist()))
    return digraph


def is_irreducible(P: MatrixLike) -> bool:
    return nx.is_strongly_connected(support_digraph(P))


def is_aperiodic(P: MatrixLike) -> bool:
    return nx.is_aperiodic(support_digraph(P))


def _factor(A: np.ndarray, what: str):
    """LU factorization with partial pivoting; tiny pivots mean singular."""
    lu, piv = lu_factor(A)
    scale = max(1.0, float(np.abs(A).max()))
    if np.min(np.abs(np.diag(lu))) < PIVOT_THRESHOLD * scale:
        raise ChainAssumptionError(f"{what} is singular.")
    return lu, piv


def _require_ergodic(matrix: np.ndarray) -> None:
    if not is_irreducible(matrix):
        raise ChainAssumptionError("Chain is reducible: some state cannot reach another.")
    if not is_aperiodic(matrix):
        logger.warning("Chain is periodic; first passage times are still well defined.")


def stationary(P: MatrixLike) -> StationaryDistribution:
    """Solve ``(P - I) pi = 0`` with one row replaced by ``sum(pi) = 1``.

    Raises:
        ChainAssumptionError: If the chain is reducible or the solution fails
            the residual check.
    """
    matrix = _array(P)
    _require_ergodic(matrix)
    n = matrix.shape[0]
    A = matrix - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = lu_solve(_factor(A, "Stationary system"), b)

    residual = float(np.abs(matrix @ pi - pi).max())
    if residual > STATIONARY_TOL:
        raise ChainAssumptionError(f"Stationary solve did not converge (residual {residual:.2e}).")
    pi = np.clip(pi, 0.0, None)
    return StationaryDistribution(pi / pi.sum())


def _endpoints(P: MatrixLike) -> Tuple[int, int]:
    if isinstance(P, TransitionMatrix):
        return P.start, P.target
    return -1, -1


def mfpt_matrix(P: MatrixLike) -> MfptResult:
    """First passage times from the fundamental matrix, M = D(I - Z + Z0 E).

    ``Z = (I - P + Pi)^-1`` with ``Pi`` the matrix whose columns all equal
    ``pi``, ``D = diag(1 / pi)``, ``Z0`` the diagonal of ``Z`` and ``E`` the
    all-ones matrix.

    Raises:
        ChainAssumptionError: If the chain is reducible or ``I - P + Pi`` is
            singular.
        RuntimeError: If the result fails the fixed-point check
            ``M = E + M P - D P``.
    """
    matrix = _array(P)
    dist = stationary(matrix)
    pi = dist.pi
    n = matrix.shape[0]
    eye = np.eye(n)
    Pi = np.outer(pi, np.ones(n))
    Z = lu_solve(_factor(eye - matrix + Pi, "Fundamental matrix system"), eye)

    D = np.diag(1.0 / pi)
    Z0E = np.outer(np.diag(Z), np.ones(n))
    M = D @ (eye - Z + Z0E)

    residual = np.abs(M - (np.ones((n, n)) + M @ matrix - D @ matrix)).max()
    if residual > SOLVER_AGREEMENT_TOL * max(1.0, float(np.abs(M).max())):
        raise RuntimeError(f"First passage matrix fails its fixed-point check ({residual:.2e}).")

    start, target = _endpoints(P)
    if start < 0:
        expected = float("nan")
    elif start == target:
        expected = 0.0
    else:
        expected = float(M[target, start])
    return MfptResult(M, dist, expected)


def hitting_time(P: MatrixLike, target: int) -> np.ndarray:
    """Mean steps from every state to the first visit of ``target``.

    Solves ``t_j = 1 + sum_k p(j -> k) t_k`` with ``t_target = 0``. Only the
    columns of non-target states matter.

    Raises:
        ChainAssumptionError: If some state cannot reach ``target``.
    """
    matrix = P.matrix if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)
    n = matrix.shape[0]
    if not 0 <= target < n:
        raise ChainAssumptionError(f"Target index {target} outside a chain of {n} states.")
    reaching = nx.ancestors(support_digraph(matrix), target) | {target}
    stuck = sorted(set(range(n)) - reaching)
    if stuck:
        raise ChainAssumptionError(f"States {stuck} cannot reach target {target}.")

    A = np.eye(n) - matrix.T
    A[target, :] = 0.0
    A[target, target] = 1.0
    b = np.ones(n)
    b[target] = 0.0
    return lu_solve(_factor(A, "Hitting-time system"), b)


def ergodize(P: MatrixLike, target: int, start: int) -> MatrixLike:
    """Send the absorbing target back to ``start``.

    Passage times from ``start`` to ``target`` are unchanged while the chain
    becomes irreducible whenever every state reaches the target.

    Raises:
        ChainAssumptionError: If ``target`` is not absorbing.
    """
    matrix = P.matrix if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)
    unit = np.zeros(matrix.shape[0])
    unit[target] = 1.0
    if not np.allclose(matrix[:, target], unit, rtol=0, atol=STOCHASTIC_TOL):
        raise ChainAssumptionError(f"State {target} is not absorbing.")
    result = matrix.copy()
    result[:, target] = 0.0
    result[start, target] = 1.0
    if isinstance(P, TransitionMatrix):
        return TransitionMatrix(P.p_success, result, start, target)
    return result


def mfpt_by_elimination(P: MatrixLike) -> np.ndarray:
    """Solve ``M = E + M P - D P`` one row at a time by Gaussian elimination.

    For each state ``i`` the passage times into ``i`` come from the linear
    system over the other states; the diagonal is the mean return time.
    """
    matrix = _array(P)
    _require_ergodic(matrix)
    n = matrix.shape[0]
    M = np.zeros((n, n))
    for i in range(n):
        others = [k for k in range(n) if k != i]
        block = np.eye(n - 1) - matrix[np.ix_(others, others)].T
        row = solve(block, np.ones(n - 1))
        M[i, others] = row
        M[i, i] = 1.0 + float(matrix[others, i] @ row)
    return M


def restrict_to_reachable(tm: TransitionMatrix) -> TransitionMatrix:
    """Drop states the start cannot reach under the current probabilities."""
    reachable = sorted(nx.descendants(support_digraph(tm), tm.start) | {tm.start})
    if len(reachable) == tm.size:
        return tm
    index = {s: i for i, s in enumerate(reachable)}
    if tm.target not in index:
        raise ChainAssumptionError(f"Target {tm.target} is unreachable from start {tm.start}.")
    sub = tm.matrix[np.ix_(reachable, reachable)]
    return TransitionMatrix(tm.p_success, sub, index[tm.start], index[tm.target])


def absorbing_chain_mfpt(tm: TransitionMatrix) -> Tuple[float, float]:
    """Expected steps from start to target by both solvers.

    Returns:
        ``(formula, hitting)``: the fundamental-matrix value on the ergodized
        chain and the direct hitting-time value.
    """
    if tm.start == tm.target:
        return 0.0, 0.0
    live = restrict_to_reachable(tm)
    formula = mfpt_matrix(ergodize(live, live.target, live.start)).expected_fusions
    hitting = float(hitting_time(live, live.target)[live.start])
    logger.debug(f"MFPT over {live.size} states: formula={formula:.10g}, hitting={hitting:.10g}")
    return formula, hitting
