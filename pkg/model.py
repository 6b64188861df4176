#!/usr/bin/env python3
"""
Core data types and deterministic samplers for Bernoulli 0/1 matrices.

Randomness is counter based: every sample is a pure function of
``(seed, stream_id)`` through a Philox generator keyed by both numbers, so
workers never share generator state and any sampled matrix can be rebuilt
from its provenance alone.

Matrices are stored as bit-packed rows with lazily cached unpacked bits and
per-column / per-row support lists.
"""

import hashlib
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np


SMALL_P = "small-p"
LARGE_P = "large-p"

SEED_LIMIT = 2 ** 64

# Stream channels: one trial index owns N_CHANNELS consecutive stream ids.
MATRIX_CHANNEL = 0
VECTOR_CHANNEL = 1
AUDIT_CHANNEL = 2
N_CHANNELS = 4


class ModelError(ValueError):
    """Custom exception for invalid model parameters or sampler inputs"""
    pass


def regime_of(n: int, p: float, beta: int) -> str:
    """
    Classify (n, p, beta) into the small-p or large-p regime.

    small-p iff p <= (1 + 1/(2 beta)) * log(n) / n.
    """
    threshold = (1.0 + 1.0 / (2.0 * beta)) * math.log(n) / n
    return SMALL_P if p <= threshold else LARGE_P


@dataclass(frozen=True)
class ModelParams:
    """Matrix dimension n, Bernoulli parameter p, corank level beta and seed."""

    n: int
    p: float
    beta: int = 1
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise ModelError(f"n must be an integer >= 2, got {self.n!r}")
        if not math.isfinite(self.p) or not 0.0 <= self.p <= 1.0:
            raise ModelError(f"p must lie in [0, 1], got {self.p!r}")
        if not isinstance(self.beta, (int, np.integer)) or not 1 <= self.beta <= self.n:
            raise ModelError(f"beta must satisfy 1 <= beta <= n={self.n}, got {self.beta!r}")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < SEED_LIMIT:
            raise ModelError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "beta", int(self.beta))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def pn(self) -> float:
        return self.p * self.n

    @property
    def regime(self) -> str:
        return regime_of(self.n, self.p, self.beta)

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "p": self.p, "beta": self.beta, "seed": self.seed}


@dataclass(frozen=True)
class SupportDescriptor:
    """Prescribed column support sizes b = (b_1, ..., b_n)."""

    sizes: Tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(b) for b in self.sizes)
        if any(b < 0 for b in sizes):
            raise ModelError(f"support sizes must be nonnegative, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def n(self) -> int:
        return len(self.sizes)

    def max_size(self) -> int:
        return max(self.sizes) if self.sizes else 0

    def to_dict(self) -> Dict[str, Any]:
        return {"sizes": list(self.sizes)}


@dataclass(frozen=True)
class Provenance:
    """Where a matrix came from: enough to regenerate it."""

    kind: str
    seed: Optional[int] = None
    stream_id: Optional[int] = None
    params: Optional[ModelParams] = None
    support: Optional[SupportDescriptor] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "stream_id": self.stream_id,
            "params": self.params.to_dict() if self.params else None,
            "support": self.support.to_dict() if self.support else None,
        }


FIXED = Provenance(kind="fixed")


@dataclass(frozen=True, eq=False)
class MatrixSample:
    """
    An immutable m x n 0/1 matrix (square for the Bernoulli model).

    ``packed`` holds the rows bit-packed with ``numpy.packbits``; everything
    else is derived and cached on first use.
    """

    packed: np.ndarray
    rows: int
    cols: int
    provenance: Provenance = field(default=FIXED)

    def __post_init__(self):
        expected = (self.rows, (self.cols + 7) // 8)
        if self.packed.shape != expected or self.packed.dtype != np.uint8:
            raise ModelError(f"packed rows must be uint8 with shape {expected}, got {self.packed.dtype} {self.packed.shape}")
        self.packed.setflags(write=False)

    @classmethod
    def from_array(cls, array: Any, provenance: Provenance = FIXED) -> "MatrixSample":
        """
        Build a sample from any 2-D array of zeros and ones.

        Raises:
            ModelError: If the array is not 2-D or has entries other than 0 and 1
        """
        a = np.asarray(array)
        if a.ndim != 2:
            raise ModelError(f"expected a 2-D array, got shape {a.shape}")
        if a.size and not np.isin(a, (0, 1)).all():
            raise ModelError("matrix entries must be exactly 0 or 1")
        bits = a.astype(bool)
        rows, cols = bits.shape
        return cls(np.packbits(bits, axis=1).reshape(rows, (cols + 7) // 8), rows, cols, provenance)

    @property
    def n(self) -> int:
        return self.cols

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    @cached_property
    def bits(self) -> np.ndarray:
        unpacked = np.unpackbits(self.packed, axis=1, count=self.cols)
        unpacked.setflags(write=False)
        return unpacked

    @cached_property
    def col_support_sizes(self) -> np.ndarray:
        sizes = self.bits.sum(axis=0, dtype=np.int64)
        sizes.setflags(write=False)
        return sizes

    @cached_property
    def row_support_sizes(self) -> np.ndarray:
        sizes = self.bits.sum(axis=1, dtype=np.int64)
        sizes.setflags(write=False)
        return sizes

    @cached_property
    def col_supports(self) -> Tuple[np.ndarray, ...]:
        """col_supports[j] = sorted row indices i with a_ij = 1."""
        return _split_supports(self.bits.T, self.col_support_sizes)

    @cached_property
    def row_supports(self) -> Tuple[np.ndarray, ...]:
        return _split_supports(self.bits, self.row_support_sizes)

    def as_float(self) -> np.ndarray:
        return self.bits.astype(np.float64)

    def transpose(self) -> "MatrixSample":
        return MatrixSample.from_array(self.bits.T, self.provenance)

    def digest(self) -> str:
        """SHA-256 over the shape and packed rows; the seed ledger's matrix hash."""
        h = hashlib.sha256(struct.pack("<II", self.rows, self.cols))
        h.update(self.packed.tobytes())
        return h.hexdigest()

    def support_cache_coherent(self) -> bool:
        """Rebuild the column supports from the bits and compare with the cache."""
        for j, support in enumerate(self.col_supports):
            if not np.array_equal(np.flatnonzero(self.bits[:, j]), support):
                return False
        return True


def _split_supports(bits: np.ndarray, sizes: np.ndarray) -> Tuple[np.ndarray, ...]:
    _, idx = np.nonzero(bits)
    parts = np.split(idx.astype(np.int64), np.cumsum(sizes)[:-1]) if len(sizes) else []
    for part in parts:
        part.setflags(write=False)
    return tuple(parts)


def stream_generator(seed: int, stream_id: int) -> np.random.Generator:
    """
    Philox generator keyed by (seed, stream_id); the counter is the draw index.

    Raises:
        ModelError: If either key word does not fit in 64 bits
    """
    if not 0 <= seed < SEED_LIMIT or not 0 <= stream_id < SEED_LIMIT:
        raise ModelError(f"seed and stream_id must be 64-bit unsigned, got ({seed}, {stream_id})")
    key = np.array([seed, stream_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def stream_id_for(trial: int, channel: int = MATRIX_CHANNEL) -> int:
    """Stream id owned by a trial index on one purpose channel."""
    if not 0 <= channel < N_CHANNELS:
        raise ModelError(f"channel must lie in [0, {N_CHANNELS}), got {channel}")
    return trial * N_CHANNELS + channel


def sample_bernoulli(params: ModelParams, stream_id: int) -> MatrixSample:
    """
    Sample an n x n matrix with i.i.d. Bernoulli(p) entries.

    Args:
        params: Validated model parameters (the seed is taken from here)
        stream_id: Independent stream selector

    Returns:
        MatrixSample fully determined by (params.seed, stream_id)
    """
    rng = stream_generator(params.seed, stream_id)
    bits = rng.random((params.n, params.n)) < params.p
    provenance = Provenance("bernoulli", params.seed, stream_id, params=params)
    return MatrixSample(np.packbits(bits, axis=1), params.n, params.n, provenance)


def sample_with_column_supports(
    n: int,
    desc: SupportDescriptor,
    seed: int,
    stream_id: int,
    rows: Optional[int] = None,
) -> MatrixSample:
    """
    Sample a matrix whose column j has a uniformly random support of size b_j.

    Columns are independent. The support of column j is the set of rows
    holding the b_j smallest of ``rows`` i.i.d. uniforms, which is a uniform
    b_j-subset.

    Args:
        n: Number of columns; must equal len(desc.sizes)
        desc: Prescribed support sizes
        seed: Root seed
        stream_id: Independent stream selector
        rows: Number of rows (defaults to n)

    Raises:
        ModelError: If the descriptor length is not n or some b_j exceeds rows
    """
    rows = n if rows is None else int(rows)
    if desc.n != n:
        raise ModelError(f"support descriptor has {desc.n} sizes, expected {n}")
    if rows < 1:
        raise ModelError(f"rows must be positive, got {rows}")
    if desc.max_size() > rows:
        raise ModelError(f"support size {desc.max_size()} exceeds the {rows} available rows")

    rng = stream_generator(seed, stream_id)
    uniforms = rng.random((rows, n))
    ranks = np.argsort(np.argsort(uniforms, axis=0, kind="stable"), axis=0, kind="stable")
    bits = ranks < np.asarray(desc.sizes, dtype=np.int64)[None, :]
    provenance = Provenance("conditioned", seed, stream_id, support=desc)
    return MatrixSample(np.packbits(bits, axis=1).reshape(rows, (n + 7) // 8), rows, n, provenance)


def rearrangement(x: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nonincreasing rearrangement of |x|.

    Returns:
        (sigma, x_star) with x_star[i] = |x[sigma[i]]|; sigma is 0-based and
        ties keep the smaller original index first

    Raises:
        ModelError: If x has non-finite entries
    """
    values = np.asarray(x, dtype=np.float64).ravel()
    if not np.isfinite(values).all():
        raise ModelError("rearrangement requires finite entries")
    magnitudes = np.abs(values)
    sigma = np.argsort(-magnitudes, kind="stable")
    return sigma, magnitudes[sigma]
