#!/usr/bin/env python3
"""
Epsilon-net cardinality calculators and desk-scale coverage checks.

The log-cardinality calculators return the natural logarithm of the covering
bounds used for sparse vectors, the steep head N1, the almost-constant block
N4, the R_kt classes and the steep tails T2'/T3'.

Coverage checks build the same product nets at a coarse epsilon: the
rearranged vector is cut into rank blocks, each block is rounded to a grid in
l_inf, the almost-constant block snaps to lambda times the all-ones vector and
the mean direction is rounded separately so the distance can be measured in
the triple norm.
"""

import math
from dataclasses import dataclass
from itertools import combinations, product
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp

from logging_config import get_logger
from model import VECTOR_CHANNEL, rearrangement, stream_generator
from structure import (
    ClassParams,
    GrowthFunction,
    ScaleSequence,
    class_representative,
    classify_vector,
    psi_ladder,
    scale_sequence,
    triple_norm,
)


NET_KINDS = ("basic", "N1", "N4", "R", "T")
COVER_KINDS = ("basic", "T2", "T3", "R")
DEFAULT_MAX_NET_POINTS = 200_000
MAX_COVER_N = 200


class NetError(ValueError):
    """Custom exception for invalid net arguments"""
    pass


class NetTooLargeError(NetError):
    """Custom exception for nets that would not fit in memory"""
    pass


def _require(condition: bool, message: str):
    if not condition:
        raise NetError(message)


def _log_binom(n: int, k: int) -> float:
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def net_log_cardinality(kind: str, **args) -> float:
    """
    Natural log of a net cardinality bound.

    Kinds and arguments:
        basic (l, n, a, eps): sparse vectors with |supp| <= l and norm < a,
            (3a/eps * en/l)^l, or 1 when eps >= a
        N1 (a, eps, pn, c_t1, s, n_s): the steep head with x*_{n_s} = a
        N4 (r, n): signed indicator vectors of sets of size >= n - rn,
            exp(2 log(e/r) rn)
        R (r, n): (e/r)^{3rn}
        T (i, pn, rung): exp(2 log(pn) n_{s+i-1}) for i in {2, 3}, rung = n_{s+i-1}

    Raises:
        NetError: If the kind is unknown or an argument is out of range
    """
    try:
        if kind == "basic":
            l, n, a, eps = int(args["l"]), int(args["n"]), float(args["a"]), float(args["eps"])
            _require(1 <= l <= n, f"need 1 <= l <= n, got l={l}, n={n}")
            _require(a > 0 and eps > 0, f"need a > 0 and eps > 0, got a={a}, eps={eps}")
            if eps >= a:
                return 0.0
            return l * math.log(3.0 * a / eps * math.e * n / l)
        if kind == "N1":
            a, eps, pn = float(args["a"]), float(args["eps"]), float(args["pn"])
            c_t1, s, n_s = float(args["c_t1"]), int(args["s"]), int(args["n_s"])
            _require(a > 0 and eps > 0 and pn > 1, f"need a, eps > 0 and pn > 1, got a={a}, eps={eps}, pn={pn}")
            if eps < c_t1 * pn * a:
                return 2.0 * math.log(max(a / eps, 1.0) * pn ** 3) * n_s
            if eps < (c_t1 * pn) ** s * a:
                return 2.0 * math.log(pn ** 3) * n_s
            return 0.0
        if kind == "N4":
            r, n = float(args["r"]), int(args["n"])
            _require(0 < r < 1 and n >= 1, f"need r in (0, 1) and n >= 1, got r={r}, n={n}")
            return 2.0 * math.log(math.e / r) * r * n
        if kind == "R":
            r, n = float(args["r"]), int(args["n"])
            _require(0 < r < 1 and n >= 1, f"need r in (0, 1) and n >= 1, got r={r}, n={n}")
            return 3.0 * r * n * math.log(math.e / r)
        if kind == "T":
            i, pn, rung = int(args["i"]), float(args["pn"]), int(args["rung"])
            _require(i in (2, 3), f"T nets exist for i in {{2, 3}}, got {i}")
            _require(pn > 1 and rung >= 1, f"need pn > 1 and rung >= 1, got pn={pn}, rung={rung}")
            return 2.0 * math.log(pn) * rung
    except KeyError as e:
        raise NetError(f"net kind '{kind}' is missing argument {e}") from e
    raise NetError(f"unknown net kind '{kind}', expected one of {NET_KINDS}")


@dataclass(frozen=True)
class CoverageReport:
    """Result of checking sampled class members against a constructed net."""

    kind: str
    n: int
    samples: int
    covered: int
    excluded: int
    epsilon: float
    max_distance: float
    net_log_cardinality: float
    bound_log_cardinality: float
    norm: str

    @property
    def coverage(self) -> float:
        checked = self.samples - self.excluded
        return self.covered / checked if checked else 1.0

    def to_dict(self) -> Dict[str, object]:
        return {
            "kind": self.kind, "n": self.n, "samples": self.samples, "covered": self.covered,
            "excluded": self.excluded, "epsilon": self.epsilon, "max_distance": self.max_distance,
            "net_log_cardinality": self.net_log_cardinality,
            "bound_log_cardinality": self.bound_log_cardinality, "norm": self.norm,
        }


def sparse_grid_net(n: int, l: int, a: float, eps: float, max_points: int = DEFAULT_MAX_NET_POINTS) -> np.ndarray:
    """
    Explicit l_inf eps-net of {x : |supp(x)| <= l, ||x||_inf < a}.

    Every size-l support carries the grid of centers -a + eps + 2 eps i.

    Raises:
        NetTooLargeError: If the net has more than max_points points
    """
    levels = max(math.ceil(a / eps), 1)
    count = math.comb(n, l) * levels ** l
    if count > max_points:
        raise NetTooLargeError(f"net would hold {count} points (cap {max_points})")
    centers = -a + eps + 2.0 * eps * np.arange(levels)
    centers = np.minimum(centers, a)
    net = np.zeros((count, n))
    row = 0
    for support in combinations(range(n), l):
        for values in product(centers, repeat=l):
            net[row, list(support)] = values
            row += 1
    return net


def _quantize(values: np.ndarray, step: float) -> np.ndarray:
    return np.round(values / step) * step


def _levels(cap: float, step: float) -> int:
    return 2 * math.ceil(cap / step) + 1


@dataclass(frozen=True)
class _Block:
    lo: int
    hi: int
    cap: float
    budget: float

    @property
    def size(self) -> int:
        return max(self.hi - self.lo, 0)

    @property
    def step(self) -> float:
        return 2.0 * self.budget / math.sqrt(self.size)


class ProductNet:
    """
    Rank-block product net in the triple norm.

    Blocks [lo, hi) are rank ranges of the rearrangement. Coordinates outside
    every block are either snapped to lambda (when ``snap_rho`` is set and
    they are within rho of lambda) or set to zero.
    """

    def __init__(self, n: int, pn: float, blocks: List[_Block], e_budget: float, e_cap: float,
                 snap_rho: Optional[float] = None):
        self.n = n
        self.pn = pn
        self.blocks = [b for b in blocks if b.size > 0]
        self.e_step = 2.0 * e_budget / math.sqrt(pn)
        self.e_cap = e_cap
        self.snap_rho = snap_rho

    def nearest(self, x: np.ndarray) -> np.ndarray:
        sigma, _ = rearrangement(x)
        y = np.zeros(self.n)
        for block in self.blocks:
            idx = sigma[block.lo:block.hi]
            y[idx] = np.clip(_quantize(x[idx], block.step), -block.cap, block.cap)
        if self.snap_rho is not None:
            rest = np.ones(self.n, dtype=bool)
            for block in self.blocks:
                rest[sigma[block.lo:block.hi]] = False
            lam = 1.0 if np.count_nonzero(np.abs(x - 1.0) <= self.snap_rho) >= np.count_nonzero(np.abs(x + 1.0) <= self.snap_rho) else -1.0
            near = rest & (np.abs(x - lam) <= self.snap_rho)
            y[near] = lam
        e = np.full(self.n, 1.0 / math.sqrt(self.n))
        along = _quantize(np.array([x @ e]), self.e_step)[0]
        return y - (y @ e) * e + along * e

    def log_cardinality(self) -> float:
        total, used = 0.0, 0
        for block in self.blocks:
            total += _log_binom(self.n - used, block.size) + block.size * math.log(_levels(block.cap, block.step))
            used += block.size
        if self.snap_rho is not None:
            rest = self.n - used
            total += math.log(2.0) + float(logsumexp([_log_binom(rest, j) for j in range(rest + 1)]))
        return total + math.log(_levels(self.e_cap, self.e_step))


def _t_net(seq: ScaleSequence, cp: ClassParams, eps: float) -> ProductNet:
    s, n, pn = seq.s, seq.n, seq.pn
    head_cap = (cp.c_t1 * pn) ** s * cp.c_t2 * math.sqrt(pn)
    k = min(seq.n_j[s + 1], n)
    tail_end = max(min(seq.n_j[s + 2], n), k)
    blocks = [
        _Block(0, seq.n_j[s], head_cap, eps / 8.0),
        _Block(seq.n_j[s], k, cp.c_t2 * math.sqrt(pn), eps / 8.0),
        _Block(k, tail_end, 1.0, eps / 8.0),
    ]
    return ProductNet(n, pn, blocks, eps / 8.0, head_cap * math.sqrt(n))


def _r_net(seq: ScaleSequence, cp: ClassParams, k: int, t: int, eps: float) -> ProductNet:
    s, n, pn = seq.s, seq.n, seq.pn
    psis, _ = psi_ladder(cp.c_t2, pn)
    cap = cp.c_t2 ** 2 * pn
    tail_end = max(seq.r_index, k)
    blocks = [
        _Block(0, seq.n_j[s], cap, eps / 8.0),
        _Block(seq.n_j[s], k, cap, eps / 8.0),
        _Block(k, tail_end, psis[t] * math.sqrt(n), eps / 8.0),
    ]
    return ProductNet(n, pn, blocks, eps / 8.0, cap * math.sqrt(n), snap_rho=cp.rho)


def net_cover_check(
    kind: str,
    sample_count: int,
    seed: int,
    n: int = 100,
    p: Optional[float] = None,
    cp: Optional[ClassParams] = None,
    l: int = 2,
    a: float = 1.0,
    eps: Optional[float] = None,
    max_points: int = DEFAULT_MAX_NET_POINTS,
    stream_id: int = VECTOR_CHANNEL,
) -> CoverageReport:
    """
    Sample class members and check each has a net point within epsilon.

    Kinds:
        basic: explicit l_inf net of sparse vectors (n, l, a, eps)
        T2, T3: product nets for T2' / T3' representatives in the triple norm,
            at the covering radius sqrt(2n)/(c_t2 sqrt(pn))
        R: product nets for almost-constant vectors tagged R1, at psi_t sqrt(n)

    Raises:
        NetError: If the kind is unknown, n is too large or arguments are invalid
        NetTooLargeError: If an explicit net exceeds max_points
    """
    if kind not in COVER_KINDS:
        raise NetError(f"unknown coverage kind '{kind}', expected one of {COVER_KINDS}")
    _require(sample_count >= 1, f"sample_count must be >= 1, got {sample_count}")
    _require(2 <= n <= MAX_COVER_N, f"coverage checks run at desk scale (2 <= n <= {MAX_COVER_N}), got n={n}")
    logger = get_logger("nets")
    rng = stream_generator(seed, stream_id)

    if kind == "basic":
        eps = 0.25 * a if eps is None else eps
        net = sparse_grid_net(n, l, a, eps, max_points)
        worst, covered = 0.0, 0
        for _ in range(sample_count):
            x = np.zeros(n)
            support = rng.choice(n, int(rng.integers(1, l + 1)), replace=False)
            x[support] = rng.uniform(-a, a, support.size)
            distance = float(np.min(np.max(np.abs(net - x), axis=1)))
            worst = max(worst, distance)
            covered += distance <= eps + 1e-12
        report = CoverageReport(kind, n, sample_count, covered, 0, eps, worst,
                                math.log(len(net)), net_log_cardinality("basic", l=l, n=n, a=a, eps=eps), "l_inf")
        logger.structured_log("net_cover_check", report.to_dict())
        return report

    p = math.log(n) / n if p is None else p
    cp = ClassParams.defaults() if cp is None else cp
    seq = scale_sequence(n, p, cp.beta, cp.gamma, cp.r)
    g = GrowthFunction.build(seq, cp)
    worst, covered, excluded = 0.0, 0, 0

    if kind in ("T2", "T3"):
        i = 2 if kind == "T2" else 3
        eps = math.sqrt(2.0 * n) / (cp.c_t2 * math.sqrt(seq.pn)) if eps is None else eps
        net = _t_net(seq, cp, eps)
        rep_kind = "T2prime" if kind == "T2" else "T3profile"
        for _ in range(sample_count):
            x = class_representative(rep_kind, seq, cp, rng)
            if kind == "T2" and not classify_vector(x, cp, seq, g).has("T2"):
                excluded += 1
                continue
            distance = triple_norm(x - net.nearest(x), p)
            worst = max(worst, distance)
            covered += distance <= eps
        bound = net_log_cardinality("T", i=i, pn=seq.pn, rung=seq.n_j[seq.s + i - 1])
        report = CoverageReport(kind, n, sample_count, covered, excluded, eps, worst, net.log_cardinality(), bound, "triple")
        logger.structured_log("net_cover_check", report.to_dict())
        return report

    psis, _ = psi_ladder(cp.c_t2, seq.pn)
    log_sizes = []
    for _ in range(sample_count):
        x = class_representative("AC", seq, cp, rng)
        label = classify_vector(x, cp, seq, g)
        windows = [tag for tag in label.named("Rkt") if tag.index[2] == 1]
        if not windows:
            excluded += 1
            continue
        k, t, _ = windows[0].index
        radius = psis[t - 1] * math.sqrt(n) if eps is None else eps
        net = _r_net(seq, cp, k, t, radius)
        y = x / label.scale
        distance = triple_norm(y - net.nearest(y), p)
        worst = max(worst, distance / radius)
        covered += distance <= radius
        log_sizes.append(net.log_cardinality())
    report = CoverageReport(
        kind, n, sample_count, covered, excluded, 1.0 if eps is None else eps, worst,
        max(log_sizes) if log_sizes else 0.0, net_log_cardinality("R", r=cp.r, n=n), "triple (relative)",
    )
    logger.structured_log("net_cover_check", report.to_dict())
    return report
