#!/usr/bin/env python3
"""
Singular values, exact rank and the order statistic s_{n-beta+1}.

The default singular value path is a one-sided (Hestenes) Jacobi sweep with
round-robin pair ordering, vectorised across the disjoint pairs of each
round. It keeps high relative accuracy for the tiny singular values the
experiments care about. ``lapack`` (numpy's SVD) is the throughput path used
by long tail runs and ``eigh`` goes through the eigenvalues of A^T A.

Exact rank is tolerance free: fraction-free Bareiss elimination over Python
integers after stripping zero rows and columns.
"""

from dataclasses import dataclass
from typing import Any, Optional, Tuple

import numpy as np

from logging_config import get_logger
from model import MatrixSample, stream_generator


SVD_METHODS = ("jacobi", "lapack", "eigh")
MINMAX_RELATIVE_SLACK = 1e-8
DEFAULT_RANK_TOLERANCE_FACTOR = 1e-8
MAX_JACOBI_SWEEPS = 60


class SpectralError(ValueError):
    """Custom exception for invalid spectral inputs or failed factorizations"""
    pass


def as_matrix(A: Any) -> np.ndarray:
    """
    Float64 view of a MatrixSample or array-like.

    Raises:
        SpectralError: If the input is not 2-D or has non-finite entries
    """
    if isinstance(A, MatrixSample):
        return A.as_float()
    M = np.asarray(A, dtype=np.float64)
    if M.ndim != 2:
        raise SpectralError(f"expected a 2-D matrix, got shape {M.shape}")
    if not np.isfinite(M).all():
        raise SpectralError("matrix has non-finite entries")
    return M


def _round_robin(k: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pair schedule for an even number k of columns.

    Player 0 stays fixed and the others rotate; every unordered pair appears
    exactly once over the k-1 rounds and pairs within a round are disjoint.
    """
    players = list(range(k))
    tops, bottoms = [], []
    for _ in range(k - 1):
        half = k // 2
        tops.append(players[:half])
        bottoms.append(players[half:][::-1])
        players = [players[0]] + [players[-1]] + players[1:-1]
    return np.asarray(tops, dtype=np.intp), np.asarray(bottoms, dtype=np.intp)


def jacobi_singular_values(M: np.ndarray, max_sweeps: int = MAX_JACOBI_SWEEPS) -> np.ndarray:
    """
    One-sided Jacobi singular values.

    Columns are rotated pairwise until every pair is numerically orthogonal;
    the singular values are then the column norms.

    Raises:
        SpectralError: If the sweeps do not converge
    """
    m, n = M.shape
    k = n + (n % 2)
    work = np.zeros((m, k), dtype=np.float64)
    work[:, :n] = M
    if k < 2:
        return np.linalg.norm(work, axis=0)[:min(m, n)]

    tops, bottoms = _round_robin(k)
    tol = np.finfo(np.float64).eps * max(m, 1)
    for sweep in range(max_sweeps):
        rotated = False
        for P, Q in zip(tops, bottoms):
            U = work[:, P]
            V = work[:, Q]
            alpha = np.einsum("ij,ij->j", U, U)
            beta = np.einsum("ij,ij->j", V, V)
            gamma = np.einsum("ij,ij->j", U, V)
            active = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            if not active.any():
                continue
            rotated = True
            g = np.where(active, gamma, 1.0)
            zeta = (beta - alpha) / (2.0 * g)
            sign = np.where(zeta >= 0.0, 1.0, -1.0)
            t = sign / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = 1.0 / np.hypot(1.0, t)
            s = np.where(active, c * t, 0.0)
            c = np.where(active, c, 1.0)
            work[:, P] = c * U - s * V
            work[:, Q] = s * U + c * V
        if not rotated:
            get_logger("spectral").debug(f"Jacobi converged after {sweep + 1} sweeps for {m}x{n}")
            norms = np.sort(np.linalg.norm(work, axis=0))[::-1]
            return norms[:min(m, n)]
    raise SpectralError(f"one-sided Jacobi did not converge within {max_sweeps} sweeps")


def singular_values(A: Any, method: str = "jacobi") -> np.ndarray:
    """
    Nonincreasing singular values s_1 >= ... >= s_min(m,n).

    Args:
        A: MatrixSample or real matrix
        method: 'jacobi' (default), 'lapack' or 'eigh'

    Raises:
        SpectralError: On non-finite input or an unknown method
    """
    M = as_matrix(A)
    if M.size == 0:
        return np.zeros(0)
    if method == "jacobi":
        return jacobi_singular_values(M)
    if method == "lapack":
        return np.linalg.svd(M, compute_uv=False)
    if method == "eigh":
        gram = M.T @ M if M.shape[0] >= M.shape[1] else M @ M.T
        eigenvalues = np.clip(np.linalg.eigvalsh(gram), 0.0, None)
        return np.sqrt(eigenvalues)[::-1]
    raise SpectralError(f"unknown SVD method '{method}', expected one of {SVD_METHODS}")


def _nonzero_core(bits: np.ndarray) -> np.ndarray:
    rows = np.flatnonzero(bits.any(axis=1))
    cols = np.flatnonzero(bits.any(axis=0))
    return bits[np.ix_(rows, cols)]


def bareiss_rank(M: np.ndarray) -> int:
    """
    Rank over the rationals of an integer matrix by fraction-free elimination.

    Every intermediate entry is a minor of the input, so the division by the
    previous pivot is exact.
    """
    work = np.array(M, dtype=object)
    m, n = work.shape
    row = 0
    previous = 1
    for col in range(n):
        if row == m:
            break
        candidates = np.flatnonzero(work[row:, col] != 0)
        if candidates.size == 0:
            continue
        pivot_row = row + int(candidates[0])
        if pivot_row != row:
            work[[row, pivot_row]] = work[[pivot_row, row]]
        pivot = work[row, col]
        if row + 1 < m and col + 1 < n:
            below = work[row + 1:, col]
            work[row + 1:, col + 1:] = (
                pivot * work[row + 1:, col + 1:] - np.multiply.outer(below, work[row, col + 1:])
            ) // previous
        work[row + 1:, col] = 0
        previous = pivot
        row += 1
    return row


def exact_rank(A: Any) -> int:
    """
    Exact rank of a 0/1 (or integer) matrix.

    Zero rows and columns are stripped first; they never change the rank.

    Raises:
        SpectralError: If the entries are not integers
    """
    if isinstance(A, MatrixSample):
        bits = A.bits
    else:
        bits = np.asarray(A)
        if bits.ndim != 2:
            raise SpectralError(f"expected a 2-D matrix, got shape {bits.shape}")
        if not np.issubdtype(bits.dtype, np.integer) and not np.issubdtype(bits.dtype, np.bool_):
            if not np.array_equal(bits, np.round(bits)):
                raise SpectralError("exact rank requires integer entries")
            bits = bits.astype(np.int64)
    core = _nonzero_core(bits)
    if core.size == 0:
        return 0
    return bareiss_rank(core.astype(np.int64))


def s_order_statistic(A: Any, beta: int, method: str = "jacobi", values: Optional[np.ndarray] = None) -> float:
    """
    s_{n-beta+1}(A), the beta-th smallest singular value.

    Raises:
        SpectralError: If beta is outside [1, n]
    """
    sv = singular_values(A, method) if values is None else values
    n = len(sv)
    if not 1 <= beta <= n:
        raise SpectralError(f"beta must satisfy 1 <= beta <= {n}, got {beta}")
    return float(sv[n - beta])


@dataclass(frozen=True)
class MinMaxResult:
    lhs: float
    best_rhs: float
    holds: bool


def submatrix_minmax_check(
    A: Any,
    beta: int,
    subset_trials: int,
    seed: int,
    stream_id: int = 0,
    method: str = "jacobi",
) -> MinMaxResult:
    """
    Compare s_{n-beta+1}(A) with s_min(A_{I,J}) over random |I| = |J| = n-beta+1.

    Raises:
        SpectralError: If beta or subset_trials is out of range
    """
    M = as_matrix(A)
    n = M.shape[1]
    if M.shape[0] != n:
        raise SpectralError("min-max check needs a square matrix")
    if not 1 <= beta <= n:
        raise SpectralError(f"beta must satisfy 1 <= beta <= {n}, got {beta}")
    if subset_trials < 1:
        raise SpectralError("subset_trials must be at least 1")

    sv = singular_values(M, method)
    lhs = float(sv[n - beta])
    size = n - beta + 1
    rng = stream_generator(seed, stream_id)
    best = 0.0
    for _ in range(subset_trials):
        I = np.sort(rng.choice(n, size, replace=False))
        J = np.sort(rng.choice(n, size, replace=False))
        best = max(best, float(singular_values(M[np.ix_(I, J)], method)[-1]))
    s1 = float(sv[0]) if n else 0.0
    return MinMaxResult(lhs, best, lhs >= best - MINMAX_RELATIVE_SLACK * s1)


def column_distance(A: Any, i: int) -> float:
    """
    Euclidean distance from column i (0-based) to the span of the other columns.

    Raises:
        SpectralError: If n < 2 or i is out of range
    """
    M = as_matrix(A)
    n = M.shape[1]
    if n < 2:
        raise SpectralError("column distance needs at least two columns")
    if not 0 <= i < n:
        raise SpectralError(f"column index {i} out of range for {n} columns")
    column = M[:, i]
    others = np.delete(M, i, axis=1)
    coefficients, *_ = np.linalg.lstsq(others, column, rcond=None)
    return float(np.linalg.norm(column - others @ coefficients))


def default_tolerance(values: np.ndarray, n: int) -> float:
    s1 = float(values[0]) if len(values) else 0.0
    return DEFAULT_RANK_TOLERANCE_FACTOR * s1 * n


@dataclass(frozen=True)
class SpectralReport:
    """Singular values plus exact and floating rank of one matrix."""

    singular_values: Tuple[float, ...]
    exact_rank: int
    corank: int
    tolerance: float
    floating_rank: int

    @property
    def gap_exceeds_tolerance(self) -> bool:
        """Whether the spectral gap at the exact rank boundary exceeds 10x tolerance."""
        sv = self.singular_values
        upper = sv[self.exact_rank - 1] if self.exact_rank > 0 else float("inf")
        lower = sv[self.exact_rank] if self.exact_rank < len(sv) else 0.0
        return upper - lower > 10.0 * self.tolerance

    @property
    def gap_consistent(self) -> bool:
        return self.floating_rank == self.exact_rank or not self.gap_exceeds_tolerance


def spectral_report(A: Any, tolerance: Optional[float] = None, method: str = "jacobi") -> SpectralReport:
    sv = singular_values(A, method)
    n = as_matrix(A).shape[1]
    tol = default_tolerance(sv, n) if tolerance is None else float(tolerance)
    rank = exact_rank(A)
    floating = int(np.count_nonzero(sv > tol))
    return SpectralReport(tuple(float(s) for s in sv), rank, n - rank, tol, floating)


@dataclass(frozen=True)
class CorankCheck:
    """Outcome of the zero-pattern implication on one matrix."""

    zero_rows: int
    zero_cols: int
    beta: int
    implied: bool
    method: str
    corank_lower_bound: int
    floating_value: Optional[float]
    holds: bool


def corank_certificate(
    A: MatrixSample,
    beta: int,
    exact_rank_max_n: int,
    order_statistic: Optional[float] = None,
    tolerance: Optional[float] = None,
) -> CorankCheck:
    """
    Check that max(#zero rows, #zero cols) >= beta forces corank >= beta.

    When the nonzero core is small enough the corank comes from exact rank.
    Otherwise the certificate is rank <= min(#nonzero rows, #nonzero cols)
    together with s_{n-beta+1} <= tolerance when the order statistic is given.
    """
    n = A.cols
    zero_rows = int(np.count_nonzero(A.row_support_sizes == 0))
    zero_cols = int(np.count_nonzero(A.col_support_sizes == 0))
    implied = max(zero_rows, zero_cols) >= beta
    core_dim = max(A.rows - zero_rows, n - zero_cols)

    if not implied:
        return CorankCheck(zero_rows, zero_cols, beta, False, "not-implied", 0, order_statistic, True)
    if core_dim <= exact_rank_max_n:
        method = "exact"
        corank = n - exact_rank(A)
        holds = corank >= beta
    else:
        method = "structural"
        corank = n - min(A.rows - zero_rows, n - zero_cols)
        holds = corank >= beta
        if order_statistic is not None and tolerance is not None:
            holds = holds and order_statistic <= tolerance

    if not holds:
        get_logger("spectral").user_warning(
            f"Corank implication violated: zero rows={zero_rows}, zero cols={zero_cols}, "
            f"corank bound={corank}, beta={beta}"
        )
    return CorankCheck(zero_rows, zero_cols, beta, implied, method, corank, order_statistic, holds)
