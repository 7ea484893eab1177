"""Application workflows: LTI system identification with a symmetric probe,
and piecewise-constant signal recovery through the A*D / L factorization.

Signal time is 0-based; probing a length-n sparse impulse response with the
symmetric sequence a[0..n+k-2] measures the convolution at lags n-1..n+k-2,
which is exactly the symmetric Toeplitz operator built from a[0..n-1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import MeasurementOperator, build_operator
from .randgen import DistributionSpec, ParameterError, SeedSpec, draw_sequence
from .recovery import RecoveryResult, SolverConfig, basis_pursuit
from .signals import SparseSignal


@dataclass(frozen=True)
class ProbeSequence:
    """Probe of duration n+k-1, symmetric about time n-1: a[n-1+t] = a[n-1-t]
    for t = 1..k-1.  Only the n leading scalars are independent; the mirrored
    tail is derived, never drawn."""

    n: int
    k: int
    free: np.ndarray = field(repr=False)

    def __post_init__(self):
        free = np.asarray(self.free, dtype=np.float64)
        if free.shape != (self.n,):
            raise ParameterError("free part must have length n")
        if not 1 <= self.k <= self.n:
            raise ParameterError("need 1 <= k <= n")
        object.__setattr__(self, "free", free)

    @property
    def full(self) -> np.ndarray:
        """The n+k-1 probe samples, mirrored tail included."""
        if self.k == 1:
            return self.free.copy()
        tail = self.free[self.n - 1 - np.arange(1, self.k)]
        return np.concatenate([self.free, tail])

    def to_operator(self, fast_threshold: int | None = None) -> MeasurementOperator:
        """The induced k x n symmetric Toeplitz measurement operator."""
        kwargs = {} if fast_threshold is None else {"fast_threshold": fast_threshold}
        return build_operator(
            "sym_toeplitz", self.k, self.n, generator=self.free, **kwargs
        )


def make_probe(n: int, k: int, dist: DistributionSpec, seed: SeedSpec) -> ProbeSequence:
    """Draw the free part from ``dist``; the tail is the exact mirror."""
    if not 1 <= k <= n:
        raise ParameterError("need 1 <= k <= n")
    return ProbeSequence(n=n, k=k, free=draw_sequence(dist, n, seed))


def convolve_and_measure(probe: ProbeSequence, x) -> np.ndarray:
    """Full linear convolution of the probe with x, sampled at lags
    n-1 .. n+k-2 (the system-identification measurement window)."""
    dense_x = x.to_dense() if isinstance(x, SparseSignal) else np.asarray(x, dtype=np.float64)
    if dense_x.shape != (probe.n,):
        raise ParameterError("x must have ambient length n")
    full = np.convolve(probe.full, dense_x)
    return full[probe.n - 1 : probe.n - 1 + probe.k]


def identify_system(
    probe: ProbeSequence, y: np.ndarray, cfg: SolverConfig | None = None
) -> RecoveryResult:
    """Recover a sparse impulse response from probe measurements by basis
    pursuit over the induced symmetric Toeplitz operator."""
    return basis_pursuit(probe.to_operator(), y, cfg)


@dataclass(frozen=True)
class PwcSignal:
    """Piecewise-constant x = L theta with sparse jump vector theta."""

    theta: SparseSignal

    @property
    def n(self) -> int:
        return self.theta.n

    @property
    def x(self) -> np.ndarray:
        return np.cumsum(self.theta.to_dense())

    @property
    def pieces(self) -> int:
        return self.theta.sparsity


def vector_to_csv(v: np.ndarray) -> str:
    """One value per line, full precision; used for probe and response IO."""
    return "\n".join(f"{float(x):.17g}" for x in np.asarray(v).ravel()) + "\n"


def vector_from_csv(text: str) -> np.ndarray:
    values = [float(line) for line in text.split() if line.strip()]
    return np.asarray(values, dtype=np.float64)


def probe_to_csv(probe: ProbeSequence) -> str:
    """Free part only; the mirrored tail is reconstructed on read."""
    return vector_to_csv(probe.free)


def probe_from_csv(text: str, k: int) -> ProbeSequence:
    free = vector_from_csv(text)
    return ProbeSequence(n=free.size, k=k, free=free)


def recover_pwc(
    op_AL: MeasurementOperator, y: np.ndarray, cfg: SolverConfig | None = None
) -> tuple[RecoveryResult, np.ndarray]:
    """Recover a PWC signal from y = (A D) x.

    Because D L = I, the effective operator on theta is A itself, so the
    solve runs against the uncomposed symmetric Toeplitz operator; returns
    (theta result, x_hat = L theta_hat)."""
    if not op_AL.compose_D:
        raise ParameterError("recover_pwc expects an operator composed with D")
    effective = MeasurementOperator(
        op_AL.kind,
        op_AL.k,
        op_AL.n,
        op_AL.generator,
        theta=op_AL.theta,
        compose_D=False,
        dist=op_AL.dist,
        seed=op_AL.seed,
        fast_threshold=op_AL.fast_threshold,
    )
    result = basis_pursuit(effective, y, cfg)
    return result, np.cumsum(result.x_hat)
