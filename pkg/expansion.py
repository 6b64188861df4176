#!/usr/bin/env python3
"""
Block decomposition, expansion sets and the typical-matrix events.

Low-support columns J (support at most a threshold) and the rows I they touch
split a 0/1 matrix into H = A[I, J], W = A[I, ~J] and D = A[~I, ~J]; the
block A[~I, J] is zero by construction. Rows that see exactly one 1 inside a
column set J2, located in J1, form the expansion set I_A(J1, J2); these rows
are what lets a steep vector keep a large image.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from logging_config import get_logger
from model import (
    AUDIT_CHANNEL,
    MATRIX_CHANNEL,
    SMALL_P,
    MatrixSample,
    SupportDescriptor,
    rearrangement,
    regime_of,
    sample_with_column_supports,
    stream_generator,
    stream_id_for,
)
from probability import (
    DEFAULT_C_HG,
    ProbabilityConstants,
    low_support_count_threshold,
    operator_norm_event,
    wilson_stderr,
)
from structure import ClassParams, ScaleSequence, steep_tags


EVENT_NAMES = ("omega_1", "omega_J", "omega_W", "omega_D", "omega_row", "omega_norm", "omega_RC", "omega_0")
AUDIT_CAPS = ("standard", "thirds")
DEFAULT_AUDIT_TRIALS = 64
SMALL_P_WIDE_FACTOR = 1000


class ExpansionError(ValueError):
    """Custom exception for invalid index sets or experiment parameters"""
    pass


def _bits(A: Any) -> np.ndarray:
    if isinstance(A, MatrixSample):
        return A.bits
    bits = np.asarray(A)
    if bits.ndim != 2:
        raise ExpansionError(f"expected a 2-D matrix, got shape {bits.shape}")
    return bits.astype(np.uint8)


@dataclass(frozen=True)
class BlockDecomposition:
    """
    J_cal = low-support columns, I_cal = rows touching them.

    Index arrays are sorted and 0-based.
    """

    J_cal: np.ndarray
    I_cal: np.ndarray
    threshold: int
    bits: np.ndarray = field(repr=False)

    @property
    def other_cols(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.bits.shape[1]), self.J_cal)

    @property
    def other_rows(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.bits.shape[0]), self.I_cal)

    @property
    def H(self) -> np.ndarray:
        return self.bits[np.ix_(self.I_cal, self.J_cal)]

    @property
    def W(self) -> np.ndarray:
        return self.bits[np.ix_(self.I_cal, self.other_cols)]

    @property
    def D(self) -> np.ndarray:
        return self.bits[np.ix_(self.other_rows, self.other_cols)]

    def zero_block_holds(self) -> bool:
        """A[~I, J] is identically zero."""
        return not self.bits[np.ix_(self.other_rows, self.J_cal)].any()


def block_decomposition(A: Any, threshold: int) -> BlockDecomposition:
    """
    Split A around the columns whose support size is at most ``threshold``.

    Raises:
        ExpansionError: If the threshold is outside [0, n]
    """
    bits = _bits(A)
    n = bits.shape[1]
    if not 0 <= threshold <= n:
        raise ExpansionError(f"threshold must lie in [0, {n}], got {threshold}")
    sizes = A.col_support_sizes if isinstance(A, MatrixSample) else bits.sum(axis=0)
    J_cal = np.flatnonzero(sizes <= threshold)
    I_cal = np.flatnonzero(bits[:, J_cal].any(axis=1)) if J_cal.size else np.array([], dtype=np.int64)
    decomposition = BlockDecomposition(J_cal, I_cal, threshold, bits)
    if not decomposition.zero_block_holds():
        raise ExpansionError("rows outside I touch a low-support column")
    return decomposition


def default_threshold(cp: ClassParams, n: int, p: float) -> int:
    """k_threshold in the small-p regime, floor(phi0 pn) otherwise."""
    if regime_of(n, p, cp.beta) == SMALL_P:
        return cp.k_threshold
    return int(math.floor(cp.phi0 * p * n))


def expansion_set(A: Any, J1: Iterable[int], J2: Iterable[int], rows: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Rows with exactly one 1 among the columns J2, that 1 lying in J1.

    Args:
        A: Matrix (MatrixSample or 0/1 array)
        J1: Column subset of J2 (0-based)
        J2: Column set (0-based)
        rows: Optional row restriction (e.g. the rows outside I_cal)

    Returns:
        Sorted 0-based row indices

    Raises:
        ExpansionError: If J1 is not contained in J2
    """
    bits = _bits(A)
    J1 = np.unique(np.asarray(list(J1), dtype=np.int64))
    J2 = np.unique(np.asarray(list(J2), dtype=np.int64))
    if not np.isin(J1, J2).all():
        raise ExpansionError("J1 must be a subset of J2")
    candidates = np.arange(bits.shape[0]) if rows is None else np.asarray(rows, dtype=np.int64)
    if candidates.size == 0 or J2.size == 0:
        return np.array([], dtype=np.int64)
    block = bits[np.ix_(candidates, J2)].astype(np.int64)
    in_j1 = bits[np.ix_(candidates, J1)].sum(axis=1) if J1.size else np.zeros(candidates.size, dtype=np.int64)
    mask = (block.sum(axis=1) == 1) & (in_j1 == 1)
    return candidates[mask]


def steep_image_count(A: Any, x: Sequence[float], threshold: float) -> int:
    """|{ i : |(Ax)_i| >= threshold }|."""
    if threshold < 0:
        raise ExpansionError(f"threshold must be nonnegative, got {threshold}")
    image = _bits(A).astype(np.float64) @ np.asarray(x, dtype=np.float64)
    return int(np.count_nonzero(np.abs(image) >= threshold))


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EventOutcome:
    name: str
    holds: bool
    detail: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class EventReport:
    """Per-event outcomes on one sample, plus the audit parameters used for omega_D."""

    regime: str
    outcomes: Tuple[EventOutcome, ...]
    audit: Dict[str, Any]

    def holds(self, name: str) -> bool:
        for outcome in self.outcomes:
            if outcome.name == name:
                return outcome.holds
        raise ExpansionError(f"unknown event '{name}'")

    @property
    def holds_all(self) -> bool:
        """The steep-expansion event: omega_1, omega_W, omega_D, omega_row (and omega_J for small p)."""
        names = ["omega_1", "omega_W", "omega_D", "omega_row"]
        if self.regime == SMALL_P:
            names.append("omega_J")
        return all(self.holds(name) for name in names)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "regime": self.regime,
            "events": {o.name: {"holds": o.holds, **o.detail} for o in self.outcomes},
            "audit": dict(self.audit),
            "holds_all": self.holds_all,
        }


@dataclass
class EventTally:
    """Event frequencies over a batch; merging is order independent."""

    total: int = 0
    counts: Dict[str, int] = field(default_factory=lambda: {name: 0 for name in EVENT_NAMES})
    holds_all: int = 0

    def add(self, report: EventReport):
        self.total += 1
        for outcome in report.outcomes:
            self.counts[outcome.name] = self.counts.get(outcome.name, 0) + int(outcome.holds)
        self.holds_all += int(report.holds_all)

    def merge(self, other: "EventTally") -> "EventTally":
        counts = {name: self.counts.get(name, 0) + other.counts.get(name, 0)
                  for name in sorted(set(self.counts) | set(other.counts))}
        return EventTally(self.total + other.total, counts, self.holds_all + other.holds_all)

    def frequency(self, name: str) -> Tuple[float, float]:
        """(frequency, Wilson standard error) of an event."""
        if self.total == 0:
            return 0.0, 0.0
        hits = self.holds_all if name == "holds_all" else self.counts.get(name, 0)
        return hits / self.total, wilson_stderr(hits, self.total)

    def to_dict(self) -> Dict[str, Any]:
        return {"total": self.total, "counts": dict(sorted(self.counts.items())), "holds_all": self.holds_all}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EventTally":
        return cls(int(data["total"]), {k: int(v) for k, v in data["counts"].items()}, int(data["holds_all"]))


def _audit_ranges(n: int, p: float, cp: ClassParams, regime: str, cap: str) -> List[Tuple[int, int, Any]]:
    """(n1_lo, n1_hi, J2 cap as a function of n1) for each quantified range."""
    pn = p * n
    top = int(math.floor(1.0 / (cp.gamma * p)))
    slope = pn / math.log(pn) ** 3 if pn > 1 else 1.0
    if cap == "thirds" or regime != SMALL_P:
        slope /= 3.0
    wide = lambda n1: max(top, int(slope * n1))
    if regime != SMALL_P:
        return [(1, max(top, 1), wide)]
    entry = math.ceil(math.exp(pn / math.log(pn) ** 2)) if pn > 1 else 1
    return [
        (1, entry, lambda n1: SMALL_P_WIDE_FACTOR * n1),
        (max(1, entry // 10), max(top, 1), wide),
    ]


def _audit_omega_d(
    bits: np.ndarray,
    decomposition: BlockDecomposition,
    ranges: List[Tuple[int, int, Any]],
    required: float,
    trials: int,
    rng: np.random.Generator,
    sizes: np.ndarray,
) -> Tuple[bool, Dict[str, Any]]:
    free = decomposition.other_cols
    rows = decomposition.other_rows
    worst = math.inf
    checked = 0
    if free.size == 0:
        return True, {"checked": 0, "min_size": None}
    by_support = free[np.argsort(sizes[free], kind="stable")]
    for lo, hi, cap in ranges:
        hi = min(hi, free.size)
        if lo > hi:
            continue
        # Adversarial choice: the lowest-support columns first.
        for n1 in sorted({lo, hi}):
            j2 = min(max(cap(n1), n1), free.size)
            count = expansion_set(bits, by_support[:n1], by_support[:j2], rows).size
            worst, checked = min(worst, count), checked + 1
        for _ in range(trials):
            n1 = int(rng.integers(lo, hi + 1))
            j2 = int(rng.integers(n1, min(max(cap(n1), n1), free.size) + 1))
            J2 = rng.choice(free, j2, replace=False)
            count = expansion_set(bits, J2[:n1], J2, rows).size
            worst, checked = min(worst, count), checked + 1
    holds = worst > required
    return holds, {"checked": checked, "min_size": None if worst == math.inf else int(worst), "required": required}


def check_events(
    A: MatrixSample,
    p: float,
    cp: ClassParams,
    beta: int,
    constants: Optional[ProbabilityConstants] = None,
    audit_trials: int = DEFAULT_AUDIT_TRIALS,
    seed: int = 0,
    stream_id: int = AUDIT_CHANNEL,
    cap: str = "standard",
    norm: bool = True,
) -> EventReport:
    """
    Evaluate the typical-matrix events on one square sample.

    omega_D quantifies over exponentially many (J1, J2); it is audited with
    ``audit_trials`` random pairs per size range plus the lowest-support
    columns as the adversarial choice.

    Raises:
        ExpansionError: If the audit cap is unknown or A is not square
    """
    if cap not in AUDIT_CAPS:
        raise ExpansionError(f"audit cap must be one of {AUDIT_CAPS}, got '{cap}'")
    if A.rows != A.cols:
        raise ExpansionError("events are defined for square matrices")
    constants = constants or ProbabilityConstants()
    n = A.cols
    pn = p * n
    regime = regime_of(n, p, beta)
    col_sizes = A.col_support_sizes
    row_sizes = A.row_support_sizes
    threshold = default_threshold(cp, n, p)
    decomposition = block_decomposition(A, min(threshold, n))
    J_cal = decomposition.J_cal
    outcomes = []

    all_columns_capped = bool(np.all(col_sizes <= cp.phi * pn))
    if regime == SMALL_P:
        low_ok = True
        for k in range(1, int(math.floor(pn / 2.0)) + 1):
            if np.count_nonzero(col_sizes <= k) >= low_support_count_threshold(n, p, k):
                low_ok = False
                break
        outcomes.append(EventOutcome("omega_1", low_ok and all_columns_capped,
                                     {"low_support_ok": low_ok, "columns_capped": all_columns_capped}))
    else:
        outcomes.append(EventOutcome("omega_1", J_cal.size <= beta and all_columns_capped,
                                     {"low_support_columns": int(J_cal.size), "columns_capped": all_columns_capped}))

    in_j = A.bits[:, J_cal].sum(axis=1) if J_cal.size else np.zeros(n, dtype=np.int64)
    outcomes.append(EventOutcome("omega_J", bool(np.all(in_j <= 1)), {"size": int(J_cal.size)}))

    w_sizes = decomposition.W.sum(axis=0) if decomposition.I_cal.size else np.zeros(0)
    w_cap = 2 if regime == SMALL_P else 0.5 * cp.phi0 * pn
    outcomes.append(EventOutcome("omega_W", bool(np.all(w_sizes <= w_cap)),
                                 {"max_support": int(w_sizes.max()) if w_sizes.size else 0, "cap": w_cap}))

    required = cp.k_threshold / 8.0 if regime == SMALL_P else float(beta)
    rng = stream_generator(seed, stream_id)
    ranges = _audit_ranges(n, p, cp, regime, cap)
    d_ok, d_detail = _audit_omega_d(A.bits, decomposition, ranges, required, audit_trials, rng, col_sizes)
    outcomes.append(EventOutcome("omega_D", d_ok, d_detail))

    outcomes.append(EventOutcome("omega_row", bool(np.all(row_sizes <= cp.phi * pn)),
                                 {"max_row_support": int(row_sizes.max())}))
    if norm:
        outcomes.append(EventOutcome("omega_norm", operator_norm_event(A, p, constants.c_norm),
                                     {"c_norm": constants.c_norm}))

    zero_rows = int(np.count_nonzero(row_sizes == 0))
    zero_cols = int(np.count_nonzero(col_sizes == 0))
    outcomes.append(EventOutcome("omega_RC", zero_rows < beta and zero_cols < beta,
                                 {"zero_rows": zero_rows, "zero_cols": zero_cols}))
    outcomes.append(EventOutcome("omega_0", zero_cols < beta, {"zero_cols": zero_cols}))

    audit = {"trials": audit_trials, "cap": cap, "threshold": threshold,
             "ranges": [[lo, hi] for lo, hi, _ in ranges]}
    return EventReport(regime, tuple(outcomes), audit)


# ---------------------------------------------------------------------------
# Random-subset overlap process and the expansion lemma
# ---------------------------------------------------------------------------

class TailEstimate(NamedTuple):
    empirical: float
    stderr: float
    bound: float
    trials: int


def overlap_process_sample(m1: int, sizes: Sequence[int], rng: np.random.Generator) -> np.ndarray:
    """
    One run of the overlap process.

    T_0, ..., T_k are independent uniform subsets of [m1] with |T_j| = sizes[j];
    returns X_l = |(T_0 u ... u T_{l-1}) n T_l| for l = 1..k.
    """
    covered = np.zeros(m1, dtype=bool)
    covered[rng.choice(m1, sizes[0], replace=False)] = True
    overlaps = np.zeros(len(sizes) - 1, dtype=np.int64)
    for l, size in enumerate(sizes[1:]):
        subset = rng.choice(m1, size, replace=False)
        overlaps[l] = np.count_nonzero(covered[subset])
        covered[subset] = True
    return overlaps


def _check_sizes(m1: int, sizes: Sequence[int]) -> List[int]:
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2:
        raise ExpansionError("the overlap process needs T_0 and at least one T_j")
    if any(s < 0 or s > m1 for s in sizes):
        raise ExpansionError(f"subset sizes must lie in [0, {m1}], got {sizes}")
    return sizes


def overlap_tail_bound(m1: int, sizes: Sequence[int], t: float, c_hg: float = DEFAULT_C_HG) -> float:
    """
    C_hg^k exp(-log(t / (6 S s / m1)) t k) for P(sum X_l >= t k).

    s = max_{j>=1} |T_j| and S = sum_j |T_j|. When s = 0 the sum is
    identically zero and the bound is 0.

    Raises:
        ExpansionError: If t <= max(6 S s / m1, 1)
    """
    sizes = _check_sizes(m1, sizes)
    k = len(sizes) - 1
    s, S = max(sizes[1:]), sum(sizes)
    scale = 6.0 * S * s / m1
    if t <= max(scale, 1.0):
        raise ExpansionError(f"t must exceed max(6Ss/m1, 1) = {max(scale, 1.0):.4g}, got {t}")
    if scale == 0.0:
        return 0.0
    log_bound = k * math.log(c_hg) - math.log(t / scale) * t * k
    return math.exp(min(log_bound, 700.0))


def overlap_tail_exceedances(m1: int, sizes: Sequence[int], t: float, seed: int, trials: Iterable[int]) -> int:
    """Number of trials (by index) with sum X_l >= t k; trial i uses its own vector stream."""
    sizes = _check_sizes(m1, sizes)
    target = t * (len(sizes) - 1)
    hits = 0
    for trial in trials:
        rng = stream_generator(seed, stream_id_for(trial, MATRIX_CHANNEL))
        hits += int(overlap_process_sample(m1, sizes, rng).sum() >= target)
    return hits


def expansion_tail_experiment(
    m1: int,
    sizes: Sequence[int],
    trials: int,
    t: float,
    seed: int,
    c_hg: float = DEFAULT_C_HG,
) -> TailEstimate:
    """
    Monte Carlo estimate of P(sum X_l >= t k) against the overlap tail bound.

    Args:
        m1: Ground set size
        sizes: (|T_0|, |T_1|, ..., |T_k|)
        trials: Number of independent runs
        t: Tail level (must exceed max(6 S s / m1, 1))
        seed: Root seed
        c_hg: Hypergeometric tail constant
    """
    bound = overlap_tail_bound(m1, sizes, t, c_hg)
    hits = overlap_tail_exceedances(m1, sizes, t, seed, range(trials))
    return TailEstimate(hits / trials, wilson_stderr(hits, trials), bound, trials)


def expansion_lemma_hypothesis(m1: int, j1_size: int, j2_size: int, b: Sequence[int], r: float) -> bool:
    """
    At least half of J1 has b_j >= r, and r >= |J2| 24 ||b||_inf^2 / m1.

    J1 is taken to be the first j1_size columns of b.
    """
    b = np.asarray(b, dtype=np.int64)
    heavy = np.count_nonzero(b[:j1_size] >= r)
    return heavy >= j1_size / 2.0 and r >= j2_size * 24.0 * float(b.max()) ** 2 / m1


def expansion_lemma_bound(m1: int, j1_size: int, j2_size: int, b_max: int, r: float, c_hg: float = DEFAULT_C_HG) -> float:
    """
    C_hg^{|J1|/2} exp(-log(r / (24 |J2| ||b||_inf^2 / m1)) r |J1| / 8).

    Outside the hypothesis the logarithm is negative and the value exceeds 1.
    """
    scale = 24.0 * j2_size * b_max ** 2 / m1
    log_bound = 0.5 * j1_size * math.log(c_hg) - math.log(r / scale) * r * j1_size / 8.0
    return math.exp(min(log_bound, 700.0))


def expansion_lemma_failures(
    m1: int, j1_size: int, b: Sequence[int], r: float, seed: int, trials: Iterable[int],
) -> int:
    """Trials (by index) with |I_A(J1, J2)| < |J1| r / 4 under prescribed column supports."""
    desc = SupportDescriptor(tuple(b))
    j2_size = desc.n
    J1, J2 = np.arange(j1_size), np.arange(j2_size)
    failures = 0
    for trial in trials:
        A = sample_with_column_supports(j2_size, desc, seed, stream_id_for(trial, MATRIX_CHANNEL), rows=m1)
        failures += int(expansion_set(A, J1, J2).size < j1_size * r / 4.0)
    return failures


class ExpansionLemmaEstimate(NamedTuple):
    empirical: float
    stderr: float
    bound: float
    hypothesis: bool
    trials: int


def expansion_lemma_experiment(
    m1: int,
    j1_size: int,
    j2_size: int,
    b: Sequence[int],
    r: float,
    trials: int,
    seed: int,
    c_hg: float = DEFAULT_C_HG,
) -> ExpansionLemmaEstimate:
    """
    Empirical P(|I_A(J1, J2)| < |J1| r / 4) for m1 x |J2| matrices with column
    supports b, against the expansion lemma bound.

    Raises:
        ExpansionError: If the sizes are inconsistent
    """
    if len(b) != j2_size:
        raise ExpansionError(f"need one support size per column of J2 ({j2_size}), got {len(b)}")
    if not 1 <= j1_size <= j2_size:
        raise ExpansionError(f"need 1 <= |J1| <= |J2|, got {j1_size}, {j2_size}")
    hypothesis = expansion_lemma_hypothesis(m1, j1_size, j2_size, b, r)
    if not hypothesis:
        get_logger("expansion").user_warning(
            f"expansion lemma hypothesis fails at m1={m1}, |J2|={j2_size}, r={r}: the bound is vacuous"
        )
    bound = expansion_lemma_bound(m1, j1_size, j2_size, max(b), r, c_hg)
    failures = expansion_lemma_failures(m1, j1_size, b, r, seed, range(trials))
    return ExpansionLemmaEstimate(failures / trials, wilson_stderr(failures, trials), bound, hypothesis, trials)


# ---------------------------------------------------------------------------
# Steep guarantee
# ---------------------------------------------------------------------------

class SteepGuarantee(NamedTuple):
    j: int
    tau: float
    image_norm: float
    count: int
    required: float
    holds: bool


def steep_guarantee_check(
    A: MatrixSample,
    x: Sequence[float],
    seq: ScaleSequence,
    cp: ClassParams,
    decomposition: Optional[BlockDecomposition] = None,
) -> SteepGuarantee:
    """
    For x in T1j: ||A[I, :] x|| >= tau or more than k_threshold/8 rows have
    |(Ax)_i| >= tau, with tau = x*_{n_{j-1}} / 4.

    Raises:
        ExpansionError: If x is not in T1 or touches a zero column
    """
    values = np.asarray(x, dtype=np.float64)
    _, x_star = rearrangement(values)
    tags = steep_tags(x_star, cp, seq)
    if not tags or tags[0].name != "T1":
        raise ExpansionError("the steep guarantee applies to T1 vectors")
    if np.any((values != 0) & (A.col_support_sizes == 0)):
        raise ExpansionError("x must vanish on the zero columns of A")
    j = tags[0].index[0]
    decomposition = decomposition or block_decomposition(A, min(cp.k_threshold, A.cols))
    tau = x_star[seq.n_j[j - 1] - 1] / 4.0
    image = A.as_float() @ values
    image_norm = float(np.linalg.norm(image[decomposition.I_cal])) if decomposition.I_cal.size else 0.0
    count = int(np.count_nonzero(np.abs(image) >= tau))
    required = cp.k_threshold / 8.0
    return SteepGuarantee(j, float(tau), image_norm, count, required, image_norm >= tau or count > required)
