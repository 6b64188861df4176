#!/usr/bin/env python3
"""
Vector classes for the small-ball analysis of sparse Bernoulli matrices.

A unit direction x falls into one of a few families according to the shape of
its nonincreasing rearrangement x*:

* steep vectors (T1j, T2, T3): x* drops by a large factor across one rung of
  the scale ladder n_0 < n_1 < ... < n_s < n_{s+1}, n_{s+2};
* gradual vectors (V): after scaling x*_{floor(rn)} to 1 the profile stays
  below the growth function g(n/i) and two delta*n coordinate blocks are
  rho apart;
* anticoncentration vectors (R): a long flat tail B = {k..n} with enough l2
  mass relative to its largest entry.

Everything here is pure and immutable; ladders and growth functions can be
shared freely across worker processes.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from logging_config import get_logger
from model import SMALL_P, rearrangement, regime_of
from probability import DEFAULT_C_RGZ


VECTOR_FAMILIES = ("gaussian", "heavy-tail", "sparse-support", "pm1")
REPRESENTATIVE_KINDS = ("T1", "T2prime", "T3profile", "AC", "V")

# Fallback when pn/log^3(pn) is too small to act as a ladder ratio.
MIN_LADDER_BASE = 3.0
K3_TERMS = 200
MAX_LOG_RUNG = 700.0


class StructureError(ValueError):
    """Custom exception for invalid class parameters or vectors"""
    pass


class DegenerateLadderError(StructureError):
    """Custom exception for scale ladders that collapse (n_s <= n_{s-1})"""
    pass


@dataclass(frozen=True)
class ClassParams:
    """
    Constants shaping the vector classes.

    The ranges enforced here are the hypotheses of the partition theorem:
    r in (0, 1/10), delta in (0, r/3), rho in (0, 1/10), phi0 in (0, 1/(2 beta))
    and k_threshold > 8 beta.
    """

    gamma: float = 4.0
    c_t1: float = 100.0
    c_t2: float = 100.0
    r: float = 0.05
    delta: float = 0.015
    rho: float = 0.05
    phi: float = 8.0
    phi0: float = 0.2
    k_threshold: int = 32
    beta: int = 1

    def __post_init__(self):
        checks = [
            (self.gamma >= 1.0, f"gamma must be >= 1, got {self.gamma}"),
            (self.c_t1 > 1.0, f"c_t1 must be > 1, got {self.c_t1}"),
            (self.c_t2 > 1.0, f"c_t2 must be > 1, got {self.c_t2}"),
            (0.0 < self.r < 0.1, f"r must lie in (0, 1/10), got {self.r}"),
            (0.0 < self.delta < self.r / 3.0, f"delta must lie in (0, r/3), got {self.delta}"),
            (0.0 < self.rho < 0.1, f"rho must lie in (0, 1/10), got {self.rho}"),
            (self.phi > 1.0, f"phi must be > 1, got {self.phi}"),
            (self.beta >= 1, f"beta must be >= 1, got {self.beta}"),
            (0.0 < self.phi0 < 1.0 / (2.0 * self.beta), f"phi0 must lie in (0, 1/(2 beta)), got {self.phi0}"),
            (self.k_threshold > 8 * self.beta, f"k_threshold must exceed 8 beta = {8 * self.beta}, got {self.k_threshold}"),
        ]
        for ok, message in checks:
            if not ok:
                raise StructureError(message)

    @classmethod
    def defaults(cls, beta: int = 1, **overrides) -> "ClassParams":
        """Default constants for a corank level; keyword overrides win."""
        values = {
            "phi0": min(1.0 / (2.0 * beta), 0.2) * 0.5,
            "k_threshold": max(8 * beta + 1, 32),
            "beta": beta,
        }
        values.update(overrides)
        return cls(**values)

    def validate_against(self, seq: "ScaleSequence") -> List[str]:
        """
        Check the constants against a concrete ladder.

        Returns:
            Non-fatal notes (e.g. T3 is empty because n_{s+1} >= n_{s+2})

        Raises:
            StructureError: If floor(rn) or ceil(delta n) is zero, or the
                spread blocks cannot fit below floor(rn)
        """
        block = math.ceil(self.delta * seq.n)
        if seq.r_index < 1:
            raise StructureError(f"floor(r n) = 0 at n={seq.n}, r={self.r}")
        if block < 1 or 2 * block > seq.n:
            raise StructureError(f"delta n block of size {block} does not fit in n={seq.n}")
        notes = []
        if not seq.is_monotone():
            notes.append(f"n_(s+1)={seq.n_j[-2]} >= n_(s+2)={seq.n_j[-1]}: T3 is empty")
        if seq.base_fallback:
            notes.append(f"ladder base pn/log^3(pn) < {MIN_LADDER_BASE}: using pn={seq.base:.4g}")
        return notes

    def to_dict(self) -> Dict[str, float]:
        return {
            "gamma": self.gamma, "c_t1": self.c_t1, "c_t2": self.c_t2, "r": self.r,
            "delta": self.delta, "rho": self.rho, "phi": self.phi, "phi0": self.phi0,
            "k_threshold": self.k_threshold, "beta": self.beta,
        }


@dataclass(frozen=True)
class ScaleSequence:
    """The ladder n_0 = 1 < n_1 < ... < n_s followed by n_{s+1}, n_{s+2}."""

    n: int
    p: float
    regime: str
    t0: int
    t1: int
    s: int
    n_j: Tuple[int, ...]
    base: float
    base_fallback: bool = False

    @property
    def pn(self) -> float:
        return self.p * self.n

    @property
    def r_index(self) -> int:
        return self.n_j[self.s + 2]

    def rung(self, j: int) -> int:
        return self.n_j[j]

    def is_monotone(self) -> bool:
        """Whether n_s < n_{s+1} < n_{s+2}; otherwise T3 cannot occur."""
        s = self.s
        return self.n_j[s] < self.n_j[s + 1] < self.n_j[s + 2]

    def to_dict(self) -> Dict[str, object]:
        return {
            "n": self.n, "p": self.p, "regime": self.regime, "t0": self.t0, "t1": self.t1,
            "s": self.s, "n_j": list(self.n_j), "base": self.base,
        }


def ladder_base(pn: float) -> Tuple[float, bool]:
    """
    Ratio between consecutive upper rungs: pn/log^3(pn), or pn when that is
    below MIN_LADDER_BASE.

    Returns:
        (base, fell_back)
    """
    base = pn / math.log(pn) ** 3
    if base >= MIN_LADDER_BASE:
        return base, False
    return pn, True


def scale_sequence(n: int, p: float, beta: int = 1, gamma: float = 4.0, r: float = 0.05) -> ScaleSequence:
    """
    Build the scale ladder for (n, p) in the regime selected by beta.

    Small p: n_j = 3^j below t0, n_{t0} = ceil(exp(pn/log^2 pn)), then
    geometric with ratio ``ladder_base(pn)`` up to n_s = ceil(1/(gamma p)).
    When n_s does not exceed the entry rung (small n) the ladder is the powers
    of 3 below n_s followed by n_s. Large p: n_1 = 2 and n_j = 2 base^{j-1}
    up to n_s.

    Raises:
        StructureError: If pn <= 1 or the large-p hypothesis p <= 1/(2 gamma) fails
        DegenerateLadderError: If the rungs are not strictly increasing
    """
    if not 0.0 < p <= 1.0:
        raise StructureError(f"p must lie in (0, 1], got {p}")
    pn = p * n
    if pn <= 1.0:
        raise StructureError(f"the ladder needs pn > 1, got pn={pn:.4g}")
    if gamma * p >= 1.0:
        raise DegenerateLadderError(f"gamma p = {gamma * p:.4g} >= 1 collapses n_s to n_0 = 1")

    regime = regime_of(n, p, beta)
    top = math.ceil(1.0 / (gamma * p))
    base, fallback = ladder_base(pn)

    if regime == SMALL_P:
        exponent = pn / math.log(pn) ** 2
        if exponent > MAX_LOG_RUNG:
            raise DegenerateLadderError(f"exp(pn/log^2 pn) overflows at pn={pn:.4g}")
        entry = math.ceil(math.exp(exponent))
        if top <= entry:
            # Small n: the geometric stage is empty and the powers of 3 run into n_s.
            rungs = [1]
            while 3 * rungs[-1] < top:
                rungs.append(3 * rungs[-1])
            rungs.append(top)
            s = t0 = len(rungs) - 1
            t1 = 0
        else:
            t0 = 0
            while 3 ** t0 < entry:
                t0 += 1
            t1 = 1
            while entry * base ** t1 < top:
                t1 += 1
            s = t0 + t1
            rungs = [3 ** j for j in range(t0)] + [entry]
            rungs += [math.floor(entry * base ** (j - t0)) for j in range(t0 + 1, s)]
            rungs.append(top)
    else:
        if p > 1.0 / (2.0 * gamma):
            raise StructureError(f"large-p ladder needs p <= 1/(2 gamma) = {1.0 / (2.0 * gamma):.4g}, got {p}")
        s = 1
        while top > 2.0 * base ** (s - 1):
            s += 1
        t0, t1 = 0, s
        rungs = [1] if s == 1 else [1, 2] + [math.floor(2.0 * base ** (j - 1)) for j in range(2, s)]
        rungs.append(top)

    if any(b <= a for a, b in zip(rungs, rungs[1:])):
        raise DegenerateLadderError(f"ladder is not strictly increasing: {rungs}")

    rungs.append(math.ceil(math.sqrt(n / p)))
    rungs.append(math.floor(r * n))
    seq = ScaleSequence(n, p, regime, t0, t1, s, tuple(rungs), base, fallback)
    get_logger("structure").debug(f"scale ladder n={n} p={p:.6g}: {seq.to_dict()}")
    return seq


def psi_ladder(c_t2: float, pn: float) -> Tuple[Tuple[float, ...], int]:
    """
    Norm windows for the R_kt classes.

    psi_1 = 1/sqrt(2), psi_t = 3 psi_{t-1}, and the last rung psi_m = c_t2^2 pn
    where psi_{m-1} < c_t2^2 pn <= 3 psi_{m-1}.

    Returns:
        (psi_1, ..., psi_m), m
    """
    target = c_t2 ** 2 * pn
    psis = [1.0 / math.sqrt(2.0)]
    if target <= psis[0]:
        raise StructureError(f"c_t2^2 pn = {target:.4g} does not exceed psi_1")
    while 3.0 * psis[-1] < target:
        psis.append(3.0 * psis[-1])
    psis.append(target)
    return tuple(psis), len(psis)


@dataclass(frozen=True)
class GrowthFunction:
    """
    Piecewise growth function g on [1, inf).

    Pieces, left to right: 2 t^{3/2} up to n/n_{s+1}; 2 t^3 up to n/n_s; then
    for j = 0..s-1 the linear piece (t/(n/n_{s-j})) (c_t1 pn)^j (pn)^4 on
    [n/n_{s-j}, n/n_{s-j-1}), the last one extended to infinity. Each piece is
    raised to the left limit times t/b where needed so that g(t)/t never
    decreases, which gives g(at) >= g(t) + a for a >= 2.
    """

    n: int
    p: float
    c_t1: float
    bounds: Tuple[float, ...]
    carries: Tuple[float, ...]
    s: int
    n_j: Tuple[int, ...] = field(repr=False)

    @classmethod
    def build(cls, seq: ScaleSequence, cp: ClassParams) -> "GrowthFunction":
        n, s = seq.n, seq.s
        raw = [1.0, n / seq.n_j[s + 1]] + [n / seq.n_j[s - j] for j in range(s)]
        bounds = tuple(np.maximum.accumulate(np.maximum(raw, 1.0)).tolist())
        g = cls(n, seq.p, cp.c_t1, bounds, (), s, seq.n_j)
        carries = [0.0]
        for k in range(1, len(bounds)):
            b, prev = bounds[k], bounds[k - 1]
            left = g._piece(k - 1, b)
            if carries[-1] > 0.0:
                left = max(left, carries[-1] * b / prev)
            carries.append(left)
        return cls(n, seq.p, cp.c_t1, bounds, tuple(carries), s, seq.n_j)

    def _piece(self, k: int, t):
        pn = self.p * self.n
        if k == 0:
            return 2.0 * np.power(t, 1.5)
        if k == 1:
            return 2.0 * np.power(t, 3.0)
        j = k - 2
        return (np.asarray(t) / self.bounds[k]) * (self.c_t1 * pn) ** j * pn ** 4

    def __call__(self, t) -> np.ndarray:
        """
        Evaluate g at t (scalar or array).

        Raises:
            StructureError: If some t < 1
        """
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if np.any(t < 1.0):
            raise StructureError("the growth function is defined for t >= 1")
        piece = np.searchsorted(self.bounds, t, side="right") - 1
        out = np.empty_like(t)
        for k in np.unique(piece):
            mask = piece == k
            values = self._piece(int(k), t[mask])
            if self.carries and self.carries[k] > 0.0:
                values = np.maximum(values, self.carries[k] * t[mask] / self.bounds[k])
            out[mask] = values
        return float(out[0]) if scalar else out

    def partial_products(self, terms: int) -> np.ndarray:
        """Partial products prod_{j<=J} g(2^j)^{j 2^-j} for J = 1..terms."""
        j = np.arange(1, terms + 1, dtype=np.float64)
        logs = j * np.exp2(-j) * np.log(self(np.exp2(j)))
        return np.exp(np.cumsum(logs))

    @property
    def k3(self) -> float:
        return float(self.partial_products(K3_TERMS)[-1])

    @property
    def b_n(self) -> float:
        """sqrt(sum_i g(n/i)^2), the l2 mass of the growth profile."""
        i = np.arange(1, self.n + 1, dtype=np.float64)
        return float(np.sqrt(np.sum(self(self.n / i) ** 2)))

    def profile(self) -> np.ndarray:
        """g(n/i) for i = 1..n."""
        return self(self.n / np.arange(1, self.n + 1, dtype=np.float64))


def growth_eval(g: GrowthFunction, t: float) -> float:
    return float(g(t))


def growth_bn(g: GrowthFunction) -> float:
    return g.b_n


@dataclass(frozen=True, order=True)
class Tag:
    """One class membership, e.g. T1(2), R2(40) or Rkt(40, 3, 2)."""

    name: str
    index: Tuple[int, ...] = ()

    def __str__(self) -> str:
        if not self.index:
            return self.name
        return f"{self.name}({', '.join(str(i) for i in self.index)})"


ZERO = Tag("Zero")
STEEP_NAMES = ("T1", "T2", "T3")
R_NAMES = ("R1", "R2")


@dataclass(frozen=True)
class ClassLabel:
    """Every class a vector belongs to, plus the scale x*_{floor(rn)} used for Y."""

    tags: FrozenSet[Tag]
    scale: Optional[float] = None

    def has(self, name: str) -> bool:
        return any(tag.name == name for tag in self.tags)

    def named(self, name: str) -> List[Tag]:
        return sorted(tag for tag in self.tags if tag.name == name)

    @property
    def steep(self) -> bool:
        return any(tag.name in STEEP_NAMES for tag in self.tags)

    @property
    def t1_index(self) -> Optional[int]:
        found = self.named("T1")
        return found[0].index[0] if found else None

    def steep_tags(self) -> FrozenSet[Tag]:
        return frozenset(tag for tag in self.tags if tag.name in STEEP_NAMES)

    def describe(self) -> List[str]:
        return [str(tag) for tag in sorted(self.tags)]


def _check_vector(x: Sequence[float], seq: ScaleSequence) -> np.ndarray:
    values = np.asarray(x, dtype=np.float64).ravel()
    if values.size != seq.n:
        raise StructureError(f"vector has {values.size} entries, ladder is for n={seq.n}")
    if not np.isfinite(values).all():
        raise StructureError("vector has non-finite entries")
    return values


def steep_tags(x_star: np.ndarray, cp: ClassParams, seq: ScaleSequence) -> List[Tag]:
    """
    T1j (minimal j), else T2, else T3, from a nonincreasing rearrangement.

    Rung m is read as x*_m = x_star[m - 1]; rungs beyond n are skipped.
    """
    n, s, pn = seq.n, seq.s, seq.pn
    rungs = seq.n_j
    for j in range(1, s + 1):
        if x_star[rungs[j - 1] - 1] > cp.c_t1 * pn * x_star[rungs[j] - 1]:
            return [Tag("T1", (j,))]
    drop = cp.c_t2 * math.sqrt(pn)
    upper, lower = rungs[s + 1], rungs[s + 2]
    if upper <= n and x_star[rungs[s] - 1] > drop * x_star[upper - 1]:
        return [Tag("T2")]
    if upper <= n and lower >= 1 and x_star[upper - 1] > drop * x_star[lower - 1]:
        return [Tag("T3")]
    return []


def _tail_norms(y_star: np.ndarray) -> np.ndarray:
    """tail[k - 1] = ||(y*_k, ..., y*_n)||."""
    return np.sqrt(np.cumsum((y_star ** 2)[::-1])[::-1])


def classify_vector(
    x: Sequence[float],
    cp: ClassParams,
    seq: ScaleSequence,
    g: GrowthFunction,
    c_rgz: float = DEFAULT_C_RGZ,
) -> ClassLabel:
    """
    Tag a vector with every class it belongs to.

    Steep tags are scale free. Y, AC, V and R are evaluated on
    y = x / x*_{floor(rn)}; when that coordinate is zero the vector is left
    to the steep tags.

    Args:
        x: Vector of length seq.n
        cp: Class constants
        seq: Scale ladder for (n, p)
        g: Growth function built from (seq, cp)
        c_rgz: Anticoncentration constant in the R ratio test 2 c_rgz / sqrt(p)

    Raises:
        StructureError: If x has the wrong length or non-finite entries
    """
    values = _check_vector(x, seq)
    n, p = seq.n, seq.p
    _, x_star = rearrangement(values)
    if x_star[0] == 0.0:
        return ClassLabel(frozenset([ZERO]))

    tags = set(steep_tags(x_star, cp, seq))
    is_steep = bool(tags)

    k_r = seq.r_index
    scale = float(x_star[k_r - 1])
    if scale == 0.0:
        return ClassLabel(frozenset(tags))

    tags.add(Tag("Y"))
    y = values / scale
    y_star = x_star / scale

    outside = n - k_r
    near = max(np.count_nonzero(np.abs(y - 1.0) < cp.rho), np.count_nonzero(np.abs(y + 1.0) < cp.rho))
    almost_constant = near > outside
    if almost_constant:
        tags.add(Tag("AC"))

    block = math.ceil(cp.delta * n)
    ordered = np.sort(y)
    capped = bool(np.all(y_star <= g.profile()))
    spread = ordered[block - 1] <= ordered[n - block] - cp.rho
    if capped and spread:
        tags.add(Tag("V"))

    if not is_steep:
        tags.update(_r_tags(y_star, cp, seq, almost_constant, c_rgz))
    return ClassLabel(frozenset(tags), scale)


def _r_tags(y_star: np.ndarray, cp: ClassParams, seq: ScaleSequence, almost_constant: bool, c_rgz: float) -> List[Tag]:
    n, p, pn = seq.n, seq.p, seq.pn
    k_lo = seq.n_j[seq.s]
    k_hi = min(math.floor(n / math.log(pn) ** 2), n)
    if k_hi < k_lo:
        return []
    tail = _tail_norms(y_star)
    ks = np.arange(k_lo, k_hi + 1)
    norms = tail[ks - 1]
    ratio_ok = norms >= (2.0 * c_rgz / math.sqrt(p)) * y_star[ks - 1]
    sqrt_n = math.sqrt(n)
    windows = {
        1: (math.sqrt(n / 2.0), cp.c_t2 * math.sqrt(p) * n),
        2: (2.0 * sqrt_n / cp.r, cp.c_t2 ** 2 * p * n ** 1.5),
    }
    members = {
        1: ratio_ok & almost_constant & (norms >= windows[1][0]) & (norms <= windows[1][1]),
        2: ratio_ok & (norms >= windows[2][0]) & (norms <= windows[2][1]),
    }
    psis, m = psi_ladder(cp.c_t2, pn)
    tags = []
    for level, mask in members.items():
        for k, norm in zip(ks[mask], norms[mask]):
            tags.append(Tag(f"R{level}", (int(k),)))
            for t in range(1, m):
                if psis[t - 1] * sqrt_n <= norm <= psis[t] * sqrt_n:
                    tags.append(Tag("Rkt", (int(k), t, level)))
    return tags


@dataclass(frozen=True)
class PartitionWitness:
    """The class that covers a vector, or a counterexample when none does."""

    kind: str
    tag: Optional[Tag]
    label: ClassLabel

    @property
    def found(self) -> bool:
        return self.tag is not None


def partition_witness(
    x: Sequence[float],
    cp: ClassParams,
    seq: ScaleSequence,
    g: GrowthFunction,
    c_rgz: float = DEFAULT_C_RGZ,
) -> PartitionWitness:
    """
    Show x lies in {0} or T or lambda V or lambda R for some lambda > 0.

    Preference order: zero, steep, gradual, anticoncentration. A vector
    covered by none of them is returned with kind ``counterexample`` and
    logged.
    """
    label = classify_vector(x, cp, seq, g, c_rgz)
    if ZERO in label.tags:
        return PartitionWitness("zero", ZERO, label)
    steep = sorted(label.steep_tags())
    if steep:
        return PartitionWitness("steep", steep[0], label)
    if label.has("V"):
        return PartitionWitness("gradual", Tag("V"), label)
    for name in R_NAMES:
        found = label.named(name)
        if found:
            return PartitionWitness("anticoncentration", found[0], label)
    get_logger("structure").structured_log("partition_counterexample", {
        "n": seq.n, "p": seq.p, "tags": label.describe(), "scale": label.scale,
    })
    return PartitionWitness("counterexample", None, label)


def growth_cap_holds(x: Sequence[float], seq: ScaleSequence, g: GrowthFunction) -> bool:
    """
    Pointwise cap y*_i <= g(n/i) for i >= n/n_{s+1}, with y = x / x*_{floor(rn)}.

    Vectors with x*_{floor(rn)} = 0 hold vacuously.
    """
    values = _check_vector(x, seq)
    _, x_star = rearrangement(values)
    scale = x_star[seq.r_index - 1]
    if scale == 0.0:
        return True
    start = max(math.ceil(seq.n / seq.n_j[seq.s + 1]), 1)
    y_star = x_star[start - 1:] / scale
    return bool(np.all(y_star <= g.profile()[start - 1:]))


def steep_norm_bound(j: int, seq: ScaleSequence, cp: ClassParams, n: int, p: float) -> float:
    """
    sqrt((c_t1 pn)^{2j} + n/(c_t1 pn)^2), a bound on ||x|| / x*_{n_{j-1}} over T1j.

    Raises:
        StructureError: If j is outside [1, s]
    """
    if not 1 <= j <= seq.s:
        raise StructureError(f"j must lie in [1, {seq.s}], got {j}")
    drop = cp.c_t1 * p * n
    return math.sqrt(drop ** (2 * j) + n / drop ** 2)


def triple_norm(x: Sequence[float], p: float, n: Optional[int] = None) -> float:
    """
    ||x - <x,e>e|| + sqrt(pn) |<x,e>| with e = (1, ..., 1)/sqrt(n).

    The mean direction is weighted by sqrt(pn) because a Bernoulli matrix
    stretches e by roughly pn.
    """
    values = np.asarray(x, dtype=np.float64).ravel()
    n = values.size if n is None else n
    if values.size != n:
        raise StructureError(f"vector has {values.size} entries, expected {n}")
    along = values.sum() / math.sqrt(n)
    orthogonal = values - along / math.sqrt(n)
    return float(np.linalg.norm(orthogonal) + math.sqrt(p * n) * abs(along))


def random_vector(family: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    One vector from a test family.

    Raises:
        StructureError: If the family is unknown
    """
    if family == "gaussian":
        return rng.standard_normal(n)
    if family == "heavy-tail":
        return rng.standard_cauchy(n)
    if family == "sparse-support":
        x = np.zeros(n)
        support = rng.choice(n, int(rng.integers(1, n + 1)), replace=False)
        x[support] = rng.standard_normal(support.size)
        return x
    if family == "pm1":
        return rng.choice(np.array([-1.0, 1.0]), n)
    raise StructureError(f"unknown vector family '{family}', expected one of {VECTOR_FAMILIES}")


def _flat_block(rng: np.random.Generator, size: int) -> np.ndarray:
    """size magnitudes in [1, 1.5] whose smallest is exactly 1."""
    block = 1.0 + 0.5 * rng.random(size)
    block[int(np.argmin(block))] = 1.0
    return block


def _scatter(magnitudes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    signs = rng.choice(np.array([-1.0, 1.0]), magnitudes.size)
    return rng.permutation(magnitudes * signs)


def class_representative(
    kind: str,
    seq: ScaleSequence,
    cp: ClassParams,
    rng: np.random.Generator,
    j: int = 1,
    g: Optional[GrowthFunction] = None,
) -> np.ndarray:
    """
    Construct a random member of a class.

    Kinds:
        T1: member of T1j (top n_{j-1} entries in [1, 2], the rest below
            1/(2 c_t1 pn))
        T2prime: top n_s magnitudes in [1, 1.5] with x*_{n_s} = 1, the rest
            below 1/(2 c_t2 sqrt(pn))
        T3profile: same shape with n_{s+1} leading entries (needs n_{s+1} <= n/2)
        AC: all coordinates within rho/2 of a common value
        V: magnitudes 0.99 g(n/i) with alternating signs (needs g)

    Raises:
        StructureError: If the kind is unknown or the shape does not fit
    """
    n, s, pn = seq.n, seq.s, seq.pn
    if kind == "T1":
        if not 1 <= j <= s:
            raise StructureError(f"j must lie in [1, {s}], got {j}")
        head = seq.n_j[j - 1]
        magnitudes = np.concatenate([
            1.0 + rng.random(head),
            rng.random(n - head) / (2.0 * cp.c_t1 * pn),
        ])
        return _scatter(magnitudes, rng)
    if kind in ("T2prime", "T3profile"):
        head = seq.n_j[s] if kind == "T2prime" else seq.n_j[s + 1]
        if head > n // 2:
            raise StructureError(f"{kind} needs a head of at most n/2, got {head} at n={n}")
        magnitudes = np.concatenate([
            _flat_block(rng, head),
            rng.random(n - head) / (2.0 * cp.c_t2 * math.sqrt(pn)),
        ])
        return _scatter(magnitudes, rng)
    if kind == "AC":
        sign = rng.choice(np.array([-1.0, 1.0]))
        return sign * (1.0 + 0.5 * cp.rho * rng.uniform(-1.0, 1.0, n))
    if kind == "V":
        if g is None:
            raise StructureError("V representatives need the growth function")
        magnitudes = 0.99 * g.profile()
        signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        return rng.permutation(magnitudes * signs)
    raise StructureError(f"unknown representative kind '{kind}', expected one of {REPRESENTATIVE_KINDS}")
