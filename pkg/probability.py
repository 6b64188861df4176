#!/usr/bin/env python3
"""
Exact formulas and tail bounds for Bernoulli matrix statistics.

Covers support statistics (the sets of columns with small support and the
binomial CDF q_k), zero row/column probabilities (asymptotic, exact
inclusion-exclusion, and the joint zero-count law used for the event that
some beta zero rows or columns exist), binomial and hypergeometric tails
with their closed-form bounds, the empirical Levy concentration function and
Rogozin's inequality.

Everything that can underflow is evaluated in log-space (``gammaln`` +
``logsumexp``). Alternating inclusion-exclusion sums run in mpmath with at
least 64 guard bits on top of the measured cancellation.
"""

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import mpmath
import numpy as np
from scipy.special import gammaln, logsumexp

from logging_config import get_logger
from model import MatrixSample, ModelParams, sample_bernoulli, stream_id_for


GUARD_BITS = 64
MAX_WORKING_BITS = 16384
EXACT_ZERO_ROWCOL_MAX_N = 400
EXACT_JOINT_MAX_N = 200

DEFAULT_C_RGZ = 1.0
DEFAULT_C_HG = 2.0
DEFAULT_C_NORM = 3.0


class ProbabilityError(ValueError):
    """Custom exception for invalid probability inputs or bound regimes"""
    pass


class PrecisionLossError(ProbabilityError):
    """Raised when an alternating sum loses more bits than the working precision guards"""
    pass


def _check_p(p: float, open_interval: bool = False) -> float:
    p = float(p)
    if not math.isfinite(p) or not 0.0 <= p <= 1.0:
        raise ProbabilityError(f"p must lie in [0, 1], got {p}")
    if open_interval and not 0.0 < p < 1.0:
        raise ProbabilityError(f"p must lie in (0, 1), got {p}")
    return p


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbabilityConstants:
    """
    The universal constants the bounds are stated with.

    ``provenance`` maps each constant name to ``"assumed"`` or
    ``"calibrated:<experiment id>"``.
    """

    c_rgz: float = DEFAULT_C_RGZ
    c_hg: float = DEFAULT_C_HG
    c_norm: float = DEFAULT_C_NORM
    provenance: Dict[str, str] = field(default_factory=lambda: {
        "c_rgz": "assumed", "c_hg": "assumed", "c_norm": "assumed"
    })

    def __post_init__(self):
        for name in ("c_rgz", "c_hg", "c_norm"):
            value = getattr(self, name)
            flag = self.provenance.get(name, "assumed")
            if not math.isfinite(value) or value <= 0:
                raise ProbabilityError(f"{name} must be positive, got {value}")
            if flag == "assumed" and value < 1:
                raise ProbabilityError(f"assumed constant {name} must be >= 1, got {value}")
            if flag != "assumed" and not flag.startswith("calibrated:"):
                raise ProbabilityError(f"unknown provenance flag '{flag}' for {name}")

    def calibrated(self, name: str, value: float, experiment_id: str) -> "ProbabilityConstants":
        provenance = dict(self.provenance)
        provenance[name] = f"calibrated:{experiment_id}"
        return replace(self, provenance=provenance, **{name: float(value)})

    def to_dict(self) -> Dict[str, object]:
        return {"c_rgz": self.c_rgz, "c_hg": self.c_hg, "c_norm": self.c_norm,
                "provenance": dict(self.provenance)}


def operator_norm_statistic(A: MatrixSample, p: float) -> float:
    """max(||A - pJ|| / sqrt(pn), (||A|| - pn) / sqrt(pn)) for one square sample."""
    n = A.cols
    M = A.as_float()
    scale = math.sqrt(p * n)
    centred = np.linalg.norm(M - p, ord=2)
    full = np.linalg.norm(M, ord=2)
    return max(centred / scale, (full - p * n) / scale)


def operator_norm_event(A: MatrixSample, p: float, c_norm: float) -> bool:
    """||A - EA|| <= C sqrt(pn) and ||A|| <= C sqrt(pn) + pn."""
    if p <= 0:
        return True
    return operator_norm_statistic(A, p) <= c_norm


def calibrate_c_norm(samples: Iterable[MatrixSample], p: float) -> float:
    """Smallest constant (at least 1) for which the norm event holds on every sample."""
    p = _check_p(p, open_interval=True)
    worst = 1.0
    for sample in samples:
        worst = max(worst, operator_norm_statistic(sample, p))
    return worst


# ---------------------------------------------------------------------------
# Binomial building blocks
# ---------------------------------------------------------------------------

def log_binomial_pmf(n: int, p: float, k: np.ndarray) -> np.ndarray:
    """log P(Bin(n, p) = k), vectorised over k, exact at the endpoints p = 0, 1."""
    k = np.asarray(k, dtype=np.float64)
    if p == 0.0:
        return np.where(k == 0, 0.0, -np.inf)
    if p == 1.0:
        return np.where(k == n, 0.0, -np.inf)
    log_choose = gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
    return log_choose + k * math.log(p) + (n - k) * math.log1p(-p)


def q_value(n: int, p: float, k: int) -> float:
    """q_k = P(|supp(C_1)| <= k) for a column of length n."""
    p = _check_p(p)
    if k < 0:
        return 0.0
    if k >= n:
        return 1.0
    log_cdf = logsumexp(log_binomial_pmf(n, p, np.arange(k + 1)))
    return float(min(1.0, math.exp(log_cdf)))


@dataclass(frozen=True)
class SupportProfile:
    """
    Low-support index sets of one matrix.

    L_sets[k] holds the columns with support size at most k, row_variant[k]
    the same for rows, and q_values[k] the exact q_k.
    """

    L_sets: Dict[int, np.ndarray]
    row_variant: Dict[int, np.ndarray]
    q_values: Dict[int, float]

    def count(self, k: int) -> int:
        return int(len(self.L_sets[k]))


def support_profile(A: MatrixSample, ks: Iterable[int], p: Optional[float] = None) -> SupportProfile:
    """
    Exact L_A(k) and L_{A^T}(k) for every k in ks, with q_k.

    ``p`` defaults to the sampling parameter recorded in the provenance; for
    fixed matrices without one, q_values is left empty.

    Raises:
        ProbabilityError: If some k lies outside [0, n]
    """
    ks = sorted(set(int(k) for k in ks))
    limit = max(A.rows, A.cols)
    if ks and (ks[0] < 0 or ks[-1] > limit):
        raise ProbabilityError(f"support levels must lie in [0, {limit}], got {ks}")
    if p is None and A.provenance.params is not None:
        p = A.provenance.params.p

    columns = {k: np.flatnonzero(A.col_support_sizes <= k) for k in ks}
    rows = {k: np.flatnonzero(A.row_support_sizes <= k) for k in ks}
    q_values = {k: q_value(A.rows, p, k) for k in ks} if p is not None else {}
    return SupportProfile(columns, rows, q_values)


class ZeroPattern(NamedTuple):
    zero_rows: int
    zero_cols: int
    omega_rc_holds: bool


def zero_pattern_counts(A: MatrixSample, beta: int = 1) -> ZeroPattern:
    """Zero row / column counts and whether max(counts) < beta."""
    zero_rows = int(np.count_nonzero(A.row_support_sizes == 0))
    zero_cols = int(np.count_nonzero(A.col_support_sizes == 0))
    return ZeroPattern(zero_rows, zero_cols, max(zero_rows, zero_cols) < beta)


def zero_count_distribution(n: int, p: float) -> np.ndarray:
    """Exact pmf of the number of zero columns: Bin(n, (1-p)^n)."""
    p = _check_p(p)
    q0 = math.exp(n * math.log1p(-p)) if p < 1.0 else 0.0
    return np.exp(log_binomial_pmf(n, q0, np.arange(n + 1)))


def zero_column_probability(rows: int, cols: int, p: float) -> float:
    """P(some column of a rows x cols Bernoulli(p) matrix is zero)."""
    p = _check_p(p)
    if p == 0.0:
        return 1.0
    if p == 1.0:
        return 0.0
    q = math.exp(rows * math.log1p(-p))
    return -math.expm1(cols * math.log1p(-q))


# ---------------------------------------------------------------------------
# Zero row / column probabilities
# ---------------------------------------------------------------------------

def prob_zero_rowcol_asymptotic(n: int, p: float) -> float:
    """1 - (1 - (1-p)^n)^{2n}, evaluated in log-space."""
    p = _check_p(p)
    if p == 0.0:
        return 1.0
    if p == 1.0:
        return 0.0
    q = math.exp(n * math.log1p(-p))
    return -math.expm1(2 * n * math.log1p(-q))


def _guarded(evaluate, label: str):
    """
    Run evaluate(prec) -> (value, largest |term|) until the cancellation fits.

    Lost bits are log2(largest term / |value|); the working precision must
    exceed them by 53 + GUARD_BITS.
    """
    logger = get_logger("probability")
    prec = 53 + GUARD_BITS + 64
    while True:
        with mpmath.workprec(prec):
            value, largest = evaluate()
            if value == 0:
                lost = prec
            else:
                lost = max(0, int(mpmath.ceil(mpmath.log(largest / abs(value), 2))))
            if lost + 53 + GUARD_BITS <= prec:
                return float(value)
        new_prec = lost + 53 + 2 * GUARD_BITS
        if new_prec > MAX_WORKING_BITS or new_prec <= prec:
            raise PrecisionLossError(
                f"{label}: cancellation of {lost} bits exceeds the {prec}-bit working precision"
            )
        logger.debug(f"{label}: raising working precision {prec} -> {new_prec} bits")
        prec = new_prec


def prob_zero_rowcol_exact(n: int, p: float, max_n: int = EXACT_ZERO_ROWCOL_MAX_N) -> float:
    """
    P(some zero row or zero column) by inclusion-exclusion over zero columns.

    1 - sum_k (-1)^k C(n,k) q^{kn} (1 - q^{n-k})^n with q = 1 - p. The
    default range stops at n = 400; callers may widen it with ``max_n``, the
    precision guard still applies.

    Raises:
        ProbabilityError: If n exceeds the inclusion-exclusion range
        PrecisionLossError: If cancellation cannot be guarded
    """
    p = _check_p(p)
    if n < 1 or n > max_n:
        raise ProbabilityError(f"exact zero row/column probability needs 1 <= n <= {max_n}, got {n}")
    if p == 1.0:
        return 0.0
    if p == 0.0:
        return 1.0

    def evaluate():
        q = 1 - mpmath.mpf(p)
        total = mpmath.mpf(0)
        largest = mpmath.mpf(1)
        for k in range(n + 1):
            term = mpmath.mpf(math.comb(n, k)) * q ** (k * n) * (1 - q ** (n - k)) ** n
            largest = max(largest, term)
            total += -term if k % 2 else term
        return 1 - total, largest

    return _guarded(evaluate, f"zero row/column probability (n={n}, p={p})")


def _joint_zero_count_terms(n: int, p: float, beta: int):
    """
    Evaluator for sum_{a,b < beta} P(Z_rows = a, Z_cols = b).

    P(a, b) = C(n,a) C(n,b) sum_i (-1)^i C(n-a,i) q^{n(a+i)} r^b (1-r)^{n-b}
    with r = q^{n-a-i}; the column sum was done in closed form.
    """
    def evaluate():
        q = 1 - mpmath.mpf(p)
        total = mpmath.mpf(0)
        largest = mpmath.mpf(1)
        for a in range(min(beta, n + 1)):
            for b in range(min(beta, n + 1)):
                prefix = mpmath.mpf(math.comb(n, a) * math.comb(n, b))
                for i in range(n - a + 1):
                    r = q ** (n - a - i)
                    term = prefix * math.comb(n - a, i) * q ** (n * (a + i)) * r ** b * (1 - r) ** (n - b)
                    largest = max(largest, term)
                    total += -term if i % 2 else term
        return 1 - total, largest

    return evaluate


class Estimate(NamedTuple):
    value: float
    stderr: float
    method: str


def omega_rc_complement_estimate(
    n: int,
    p: float,
    beta: int,
    method: str = "auto",
    trials: int = 10000,
    seed: int = 0,
) -> Estimate:
    """
    P(max(#zero rows, #zero cols) >= beta), exact or Monte Carlo.

    ``auto`` uses the exact path when it is in range (n <= 200, or beta = 1
    with n <= 400) and Monte Carlo otherwise; the method is reported.
    """
    p = _check_p(p)
    if beta < 1:
        raise ProbabilityError(f"beta must be positive, got {beta}")
    if beta > n:
        return Estimate(0.0, 0.0, "exact")
    exact_ok = n <= EXACT_JOINT_MAX_N or (beta == 1 and n <= EXACT_ZERO_ROWCOL_MAX_N)
    if method == "auto":
        method = "exact" if exact_ok else "monte-carlo"
    if method == "exact":
        if not exact_ok:
            raise ProbabilityError(f"exact joint zero-count law needs n <= {EXACT_JOINT_MAX_N}, got {n}")
        if p in (0.0, 1.0):
            return Estimate(1.0 if p == 0.0 else 0.0, 0.0, "exact")
        if beta == 1:
            return Estimate(prob_zero_rowcol_exact(n, p), 0.0, "exact")
        value = _guarded(_joint_zero_count_terms(n, p, beta), f"joint zero counts (n={n}, beta={beta})")
        return Estimate(min(1.0, max(0.0, value)), 0.0, "exact")
    if method == "monte-carlo":
        params = ModelParams(n, p, beta=min(beta, n), seed=seed)
        hits = 0
        for trial in range(trials):
            pattern = zero_pattern_counts(sample_bernoulli(params, stream_id_for(trial)), beta)
            hits += not pattern.omega_rc_holds
        _, half = wilson_interval(hits, trials)
        return Estimate(hits / trials, half, "monte-carlo")
    raise ProbabilityError(f"unknown method '{method}'")


def prob_omega_rc_complement(n: int, p: float, beta: int) -> float:
    """Exact P(max(#zero rows, #zero cols) >= beta) in the exact range."""
    return omega_rc_complement_estimate(n, p, beta, method="exact").value


# ---------------------------------------------------------------------------
# Tail bounds
# ---------------------------------------------------------------------------

class TailBound(NamedTuple):
    exact: float
    bound: Optional[float]

    @property
    def informative(self) -> bool:
        return self.bound is not None and self.bound < 1.0


def _safe_exp(log_value: float) -> float:
    return math.inf if log_value > 709.0 else math.exp(log_value)


def binomial_tail(n: int, p: float, k: int, side: str) -> TailBound:
    """
    Exact binomial tail against its closed-form bound.

    upper: P(Y >= k) <= 2 (enp/k)^k, needs k >= 2pn.
    lower: P(Y <= k) <= 2 (enp/(k(1-p)))^k (1-p)^n, needs k <= pn/2.
    Both regimes need p <= 1/2.

    Raises:
        ProbabilityError: Naming the regime whose precondition failed
    """
    p = _check_p(p, open_interval=True)
    if not 0 <= k <= n:
        raise ProbabilityError(f"k must lie in [0, n={n}], got {k}")
    if p > 0.5:
        raise ProbabilityError(f"{side} binomial tail bound requires p <= 1/2, got p={p}")
    pn = p * n
    log_pmf = log_binomial_pmf(n, p, np.arange(n + 1))
    if side == "upper":
        if k < 2 * pn:
            raise ProbabilityError(f"upper binomial tail bound requires k >= 2pn = {2 * pn:.6g}, got k={k}")
        exact = math.exp(logsumexp(log_pmf[k:]))
        log_bound = math.log(2.0) + k * (1.0 + math.log(pn / k))
    elif side == "lower":
        if k > pn / 2:
            raise ProbabilityError(f"lower binomial tail bound requires k <= pn/2 = {pn / 2:.6g}, got k={k}")
        exact = math.exp(logsumexp(log_pmf[:k + 1]))
        log_bound = math.log(2.0) + n * math.log1p(-p)
        if k > 0:
            log_bound += k * (1.0 + math.log(pn / (k * (1.0 - p))))
    else:
        raise ProbabilityError(f"side must be 'upper' or 'lower', got '{side}'")
    return TailBound(min(1.0, exact), _safe_exp(log_bound))


def hypergeometric_tail(n: int, m: int, k: int, l: int, c_hg: float = DEFAULT_C_HG) -> TailBound:
    """
    P(|I intersect [m]| >= l) for a uniform k-subset I of [n].

    The bound C_hg (3mk/(ln))^l is returned only in its regime
    k <= m <= n/2 with l >= 1; it is informative only when l >= 3mk/n.

    Raises:
        ProbabilityError: If the sizes are inconsistent
    """
    if not (0 <= m <= n and 0 <= k <= n and l >= 0):
        raise ProbabilityError(f"need 0 <= m, k <= n and l >= 0, got n={n}, m={m}, k={k}, l={l}")
    total = math.comb(n, k)
    favourable = sum(math.comb(m, j) * math.comb(n - m, k - j) for j in range(l, min(k, m) + 1))
    exact = float(Fraction(favourable, total))
    bound = None
    if k <= m <= n / 2 and l >= 1:
        bound = c_hg * (3.0 * m * k / (l * n)) ** l
    return TailBound(exact, bound)


def hypergeometric_bound_informative(n: int, m: int, k: int, l: int) -> bool:
    return l >= 3.0 * m * k / n


# ---------------------------------------------------------------------------
# Anticoncentration
# ---------------------------------------------------------------------------

def levy_concentration(samples: Sequence[float], lam: float) -> float:
    """
    Empirical Q(X, lam) = max over sample points u of the fraction in [u, u + 2 lam].

    Raises:
        ProbabilityError: On empty input, non-finite samples or negative lam
    """
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    if x.size == 0:
        raise ProbabilityError("Levy concentration needs at least one sample")
    if not np.isfinite(x).all():
        raise ProbabilityError("samples must be finite")
    if not math.isfinite(lam) or lam < 0:
        raise ProbabilityError(f"lambda must be a finite nonnegative number, got {lam}")
    right = np.searchsorted(x, x + 2.0 * lam, side="right")
    return float(np.max(right - np.arange(x.size)) / x.size)


def rogozin_bound(lam: float, lambdas: Sequence[float], qs: Sequence[float], c_rgz: float = DEFAULT_C_RGZ) -> float:
    """
    C lam / sqrt(sum lambda_i^2 (1 - q_i)).

    Raises:
        ProbabilityError: If lam <= max lambda_i, a q_i is outside [0,1],
            or the denominator vanishes
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    qs = np.asarray(qs, dtype=np.float64)
    if lambdas.shape != qs.shape or lambdas.size == 0:
        raise ProbabilityError("lambdas and qs must be nonempty and of equal length")
    if np.any(lambdas <= 0):
        raise ProbabilityError("every lambda_i must be positive")
    if lam <= lambdas.max():
        raise ProbabilityError(f"lambda={lam} must exceed max lambda_i={lambdas.max()}")
    if np.any((qs < 0) | (qs > 1)):
        raise ProbabilityError("every q_i must lie in [0, 1]")
    denominator = float(np.sum(lambdas ** 2 * (1.0 - qs)))
    if denominator <= 0:
        raise ProbabilityError("degenerate Rogozin bound: sum lambda_i^2 (1 - q_i) = 0")
    return c_rgz * lam / math.sqrt(denominator)


def rogozin_support_bound(x_I: Sequence[float], p: float, lam: float, c_rgz: float = DEFAULT_C_RGZ) -> float:
    """
    C lam / (sqrt(p) ||x_I||) for sums sum_{i in I} x_i xi_i with xi_i ~ Bernoulli(p).

    Raises:
        ProbabilityError: If lam <= ||x_I||_inf or x_I vanishes
    """
    p = _check_p(p, open_interval=True)
    x = np.asarray(x_I, dtype=np.float64)
    if x.size == 0 or not np.any(x):
        raise ProbabilityError("x_I must have a nonzero entry")
    if lam <= np.max(np.abs(x)):
        raise ProbabilityError(f"lambda={lam} must exceed ||x_I||_inf={np.max(np.abs(x))}")
    return c_rgz * lam / (math.sqrt(p) * float(np.linalg.norm(x)))


def indiv_q_value(m0: float, p: float) -> float:
    """q = 2 m0 p (1-p)^{2 m0 - 1}."""
    p = _check_p(p)
    if m0 < 1:
        raise ProbabilityError(f"m0 must be at least 1, got {m0}")
    if p == 1.0:
        return 0.0
    return 2.0 * m0 * p * math.exp((2.0 * m0 - 1.0) * math.log1p(-p))


def indiv_q_lower_bound(gamma: float) -> float:
    """(2/gamma) e^{-3/gamma}, the lower bound on q at m0 = 1/(gamma p)."""
    return 2.0 / gamma * math.exp(-3.0 / gamma)


def indiv_small_ball_radius(q: float, n: int, a: float) -> float:
    return math.sqrt(q * n / 50.0) * a


def indiv_tail_bound(q: float, n: int) -> float:
    """exp(-qn/40), the small-ball probability bound at radius sqrt(qn/50) a."""
    return math.exp(-q * n / 40.0)


def indiv_spread_tail_bound(q: float, n: int, m0: int, m1: int) -> float:
    """2 exp(-(1/12) log(floor(m1/m0) q) n), meaningful when floor(m1/m0) q > 1."""
    ratio = (m1 // m0) * q
    if ratio <= 0:
        return math.inf
    return min(math.inf, 2.0 * _safe_exp(-math.log(ratio) * n / 12.0))


# ---------------------------------------------------------------------------
# Support-statistic calculators
# ---------------------------------------------------------------------------

def zero_column_count_lower_bound(n: int, p: float, beta: int) -> float:
    """(1 / (e beta!)) (n (1-p)^n)^beta."""
    p = _check_p(p)
    q0n = n * math.exp(n * math.log1p(-p)) if p < 1 else 0.0
    return q0n ** beta / (math.e * math.factorial(beta))


def low_support_count_threshold(n: int, p: float, k: int) -> float:
    """log^2(n) (enp/k)^k e^{-pn} n."""
    pn = p * n
    if k < 1:
        raise ProbabilityError(f"k must be at least 1, got {k}")
    return _safe_exp(2.0 * math.log(math.log(n)) + k * (1.0 + math.log(pn / k)) - pn + math.log(n))


def low_support_event_bound(n: int) -> float:
    """2 exp(-log^2 n)."""
    return 2.0 * math.exp(-math.log(n) ** 2)


def support_excess_bound(n: int, p: float, beta: int) -> float:
    """((1-p)^n n)^{beta + 3/4}."""
    p = _check_p(p)
    q0n = n * math.exp(n * math.log1p(-p)) if p < 1 else 0.0
    return q0n ** (beta + 0.75)


def support_threshold_lambda(n: int, p: float, grid: Optional[Sequence[float]] = None) -> float:
    """
    Smallest grid lambda in (0, 1/2) with q_{floor(lambda pn)} n < 1/2.

    Raises:
        ProbabilityError: If no grid point qualifies
    """
    p = _check_p(p, open_interval=True)
    grid = np.linspace(0.01, 0.49, 49) if grid is None else np.sort(np.asarray(grid, dtype=np.float64))
    if np.any((grid <= 0) | (grid >= 0.5)):
        raise ProbabilityError("lambda grid must lie in (0, 1/2)")
    for lam in grid:
        if q_value(n, p, int(math.floor(lam * p * n))) * n < 0.5:
            return float(lam)
    raise ProbabilityError(f"no grid lambda satisfies q n < 1/2 at n={n}, p={p}")


# ---------------------------------------------------------------------------
# Monte Carlo helpers
# ---------------------------------------------------------------------------

def wilson_interval(successes: int, trials: int, z: float = 1.0) -> Tuple[float, float]:
    """
    Wilson score interval as (center, half width).

    With z = 1 the half width is the standard error reported by the harness.
    """
    if trials <= 0:
        raise ProbabilityError("trials must be positive")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2.0 * trials)) / denom
    half = z / denom * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4.0 * trials * trials))
    return center, half


def wilson_stderr(successes: int, trials: int) -> float:
    return wilson_interval(successes, trials)[1]
