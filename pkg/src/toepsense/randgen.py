"""Seed-reproducible draws from the three admissible sensing-entry distributions.

All randomness flows through :class:`EntryStream`, a counter-based Philox
generator keyed by ``(master_seed, stream_id)``.  Distinct stream ids give
statistically independent streams whose output does not depend on execution
order, so a parallel experiment harness reproduces the serial results
bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .signals import SparseSignal

DIST_KINDS = ("gaussian", "rademacher", "ternary")


class ParameterError(ValueError):
    """Invalid argument to a generation routine."""


@dataclass(frozen=True)
class DistributionSpec:
    """Entry distribution with variance 1/k.

    gaussian    N(0, 1/k)
    rademacher  +-sqrt(1/k), each with probability 1/2
    ternary     +sqrt(3/k) w.p. 1/6, 0 w.p. 2/3, -sqrt(3/k) w.p. 1/6

    All three are zero-mean with per-entry variance 1/k, so a k-entry column
    has unit norm in expectation.
    """

    kind: str
    k: int

    def __post_init__(self):
        if self.kind not in DIST_KINDS:
            raise ParameterError(f"unknown distribution kind {self.kind!r}")
        if self.k < 1:
            raise ParameterError("k must be a positive integer")


@dataclass(frozen=True)
class SeedSpec:
    """(master_seed, stream_id) pair that fully determines a random stream."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ParameterError("master_seed must be a 64-bit unsigned integer")
        if self.stream_id < 0:
            raise ParameterError("stream_id must be non-negative")


class EntryStream:
    """Counting uniform source, one Philox stream per (master_seed, stream_id).

    ``draws`` counts the uniform scalars consumed; every distribution below
    maps exactly one uniform to one output entry, so the counter equals the
    number of independent random entries generated.
    """

    def __init__(self, seed: SeedSpec):
        ss = np.random.SeedSequence(seed.master_seed, spawn_key=(seed.stream_id,))
        self._gen = np.random.Generator(np.random.Philox(ss))
        self.seed = seed
        self.draws = 0

    def uniform(self, size: int) -> np.ndarray:
        """size uniforms on [0, 1) with 53-bit resolution."""
        self.draws += int(size)
        return self._gen.random(size)


def _as_stream(seed) -> EntryStream:
    return seed if isinstance(seed, EntryStream) else EntryStream(seed)


def draw_sequence(dist: DistributionSpec, n: int, seed) -> np.ndarray:
    """Draw n i.i.d. entries from ``dist``; bit-identical for equal arguments.

    ``seed`` is a SeedSpec or an existing EntryStream (consumed in place, which
    lets callers count the draws of a composite construction).

    The gaussian map is the inverse normal CDF applied to the uniform lattice,
    with u = 0 replaced by 2**-54 to keep the image finite; the choice is part
    of the reproducibility contract.
    """
    if n < 1:
        raise ParameterError("n must be a positive integer")
    stream = _as_stream(seed)
    u = stream.uniform(n)
    k = dist.k
    if dist.kind == "gaussian":
        u = np.where(u == 0.0, 2.0**-54, u)
        return ndtri(u) * np.sqrt(1.0 / k)
    if dist.kind == "rademacher":
        s = np.sqrt(1.0 / k)
        return np.where(u < 0.5, s, -s)
    # ternary: thresholds at 1/6 and 5/6
    plus = np.sqrt(3.0 / k)
    out = np.zeros(n)
    out[u < 1.0 / 6.0] = plus
    out[u >= 5.0 / 6.0] = -plus
    return out


def sample_without_replacement(n: int, m: int, stream: EntryStream) -> np.ndarray:
    """m distinct indices from {0..n-1}, exactly uniform via partial Fisher-Yates."""
    if not 1 <= m <= n:
        raise ParameterError("need 1 <= m <= n")
    u = stream.uniform(m)
    idx = np.arange(n)
    for i in range(m):
        j = i + int(u[i] * (n - i))
        idx[i], idx[j] = idx[j], idx[i]
    return np.sort(idx[:m])


def draw_rademacher_spikes(n: int, m: int, seed) -> SparseSignal:
    """m-sparse signal with uniform support and equiprobable +-1 values."""
    if not 1 <= m <= n:
        raise ParameterError("need 1 <= m <= n")
    stream = _as_stream(seed)
    support = sample_without_replacement(n, m, stream)
    signs = np.where(stream.uniform(m) < 0.5, 1.0, -1.0)
    return SparseSignal(n=n, support=support, values=signs)
