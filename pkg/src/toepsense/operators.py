"""Structured k x n measurement operators: construction, dense form, fast apply.

Matrix conventions (1-based in the math, 0-based in code; the translation
lives in :meth:`MeasurementOperator.entry`):

* ``sym_toeplitz``       A[i][j] = a_{n-|j-i|}; row 1 is (a_n, ..., a_1).
* ``left_sym_toeplitz``  A[i][j] = a_{r(i+j-1)} with r(s) = s for s <= n and
  r(s) = 2n - s above; row 1 is (a_1, ..., a_n).
* ``toeplitz``           plain Toeplitz from n+k-1 generator scalars g, with
  A[i][j] = g_{i-j+n}; row 1 is (g_n, ..., g_1).
* ``iid_dense``          k*n independent entries, row-major.

Symmetric kinds store n generator scalars, k-1 fewer than a plain Toeplitz.
An optional sorted row subset ``theta`` picks rows of the full n x n
extension of a symmetric kind, and ``compose_D`` right-composes the operator
with the first-order differencing matrix D = L^-1.
"""

from __future__ import annotations

import json

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft

from .randgen import DistributionSpec, EntryStream, ParameterError, SeedSpec, draw_sequence

KINDS = ("iid_dense", "toeplitz", "sym_toeplitz", "left_sym_toeplitz")
SYMMETRIC_KINDS = ("sym_toeplitz", "left_sym_toeplitz")

# Below this n the dense product is at least as fast as the FFT path.
DEFAULT_FAST_THRESHOLD = 256


def generator_length(kind: str, k: int, n: int) -> int:
    """Number of independent scalars the kind consumes."""
    if kind in SYMMETRIC_KINDS:
        return n
    if kind == "toeplitz":
        return n + k - 1
    if kind == "iid_dense":
        return k * n
    raise ParameterError(f"unknown operator kind {kind!r}")


def _mirror_profile(a: np.ndarray) -> np.ndarray:
    # (a_1..a_n, a_{n-1}..a_1) in 0-based storage; length 2n-1.
    return np.concatenate([a, a[:-1][::-1]]) if a.size > 1 else a.copy()


class MeasurementOperator:
    """Immutable structured sensing operator with dense and FFT apply paths."""

    def __init__(
        self,
        kind: str,
        k: int,
        n: int,
        generator: np.ndarray,
        theta: np.ndarray | None = None,
        compose_D: bool = False,
        dist: DistributionSpec | None = None,
        seed: SeedSpec | None = None,
        fast_threshold: int = DEFAULT_FAST_THRESHOLD,
    ):
        if kind not in KINDS:
            raise ParameterError(f"unknown operator kind {kind!r}")
        if not 1 <= k <= n:
            raise ParameterError(f"need 1 <= k <= n, got k={k}, n={n}")
        generator = np.asarray(generator, dtype=np.float64)
        if generator.shape != (generator_length(kind, k, n),):
            raise ParameterError(
                f"{kind} with k={k}, n={n} needs "
                f"{generator_length(kind, k, n)} generator scalars, "
                f"got {generator.size}"
            )
        if theta is not None:
            if kind not in SYMMETRIC_KINDS:
                raise ParameterError("row subsets apply to symmetric kinds only")
            theta = np.asarray(theta, dtype=np.int64)
            if theta.shape != (k,):
                raise ParameterError("theta must contain exactly k row indices")
            if theta.min() < 0 or theta.max() >= n:
                raise ParameterError("theta indices must lie in 0..n-1")
            if np.any(np.diff(theta) <= 0):
                raise ParameterError("theta must be sorted and distinct")
        self.kind = kind
        self.k = int(k)
        self.n = int(n)
        self.generator = generator
        self.theta = theta
        self.compose_D = bool(compose_D)
        self.dist = dist
        self.seed = seed
        self.fast_threshold = int(fast_threshold)
        self.draws_consumed: int | None = None
        self._dense: np.ndarray | None = None
        self._fft: dict | None = None

    # -- entry rule -----------------------------------------------------

    def entry(self, i: int, j: int) -> float:
        """A[i][j] for 0-based i < k, j < n, straight from the entry rule."""
        if not (0 <= i < self.k and 0 <= j < self.n):
            raise IndexError("entry index out of range")
        if self.compose_D:
            # column j of A*D is A[:,j] - A[:,j+1]
            base = self._base_entry(i, j)
            return base - (self._base_entry(i, j + 1) if j + 1 < self.n else 0.0)
        return self._base_entry(i, j)

    def _base_entry(self, i: int, j: int) -> float:
        n, a = self.n, self.generator
        if self.kind == "iid_dense":
            return float(a[i * n + j])
        if self.kind == "toeplitz":
            return float(a[i - j + n - 1])
        row = int(self.theta[i]) if self.theta is not None else i
        if self.kind == "sym_toeplitz":
            return float(a[n - 1 - abs(row - j)])
        # left_sym_toeplitz: 1-based s = row+j+1, reflected at n
        s = row + j + 1
        return float(a[s - 1] if s <= n else a[2 * n - s - 1])

    @property
    def rows(self) -> np.ndarray:
        """Row indices into the full n x n extension (0-based)."""
        return self.theta if self.theta is not None else np.arange(self.k)

    # -- dense materialization -------------------------------------------

    def dense(self) -> np.ndarray:
        """The k x n matrix (including the D composition when set)."""
        base = _dense_from_generator(self.kind, self.k, self.n, self.generator, self.theta)
        if self.compose_D:
            return base @ build_D(self.n)
        return base

    def dense_columns(self, cols: np.ndarray) -> np.ndarray:
        """Selected columns of the dense matrix, O(k * len(cols)) memory."""
        cols = np.asarray(cols, dtype=np.int64)
        if cols.size and (cols.min() < 0 or cols.max() >= self.n):
            raise ParameterError("column index out of range")
        if not self.compose_D:
            return _dense_cols(self.kind, self.k, self.n, self.generator, self.theta, cols)
        nxt = np.minimum(cols + 1, self.n - 1)
        base = _dense_cols(self.kind, self.k, self.n, self.generator, self.theta, cols)
        shft = _dense_cols(self.kind, self.k, self.n, self.generator, self.theta, nxt)
        shft[:, cols == self.n - 1] = 0.0
        return base - shft

    # -- forward / adjoint -----------------------------------------------

    def apply(self, x: np.ndarray) -> np.ndarray:
        """y = A x (or A D x when compose_D), length k."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise ParameterError(f"x must have length n={self.n}")
        if self.compose_D:
            x = np.diff(x, prepend=0.0)
        return self._base_apply(x)

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        """x = A^T y (or D^T A^T y when compose_D), length n."""
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.k,):
            raise ParameterError(f"y must have length k={self.k}")
        out = self._base_adjoint(y)
        if self.compose_D:
            z = out.copy()
            z[:-1] -= out[1:]
            return z
        return out

    def _use_dense_path(self) -> bool:
        # Dense matvec wins below the threshold; also for short-and-wide
        # slices, where k*n flops undercut the length-O(n) transforms.
        return (
            self.kind == "iid_dense"
            or self.n <= self.fast_threshold
            or self.k * self.n <= self.fast_threshold**2
        )

    def _base_apply(self, x: np.ndarray) -> np.ndarray:
        if self._use_dense_path():
            return self._cached_dense() @ x
        fft = self._fft_state()
        if self.kind == "toeplitz":
            full = _cached_conv(fft["fwd"], x)
            return full[self.n - 1 : self.n - 1 + self.k]
        if self.kind == "sym_toeplitz":
            return self._full_ext_apply(x)[self.rows]
        return self._full_ext_apply(x[::-1])[self.rows]  # Hankel: reversed input

    def _base_adjoint(self, y: np.ndarray) -> np.ndarray:
        if self._use_dense_path():
            return self._cached_dense().T @ y
        fft = self._fft_state()
        if self.kind == "toeplitz":
            full = _cached_conv(fft["adj"], y)
            return full[self.k - 1 : self.k - 1 + self.n]
        # symmetric kinds: the n x n extension M is symmetric, so
        # A^T y = M (scatter of y into the selected rows)
        v = np.zeros(self.n)
        v[self.rows] = y
        if self.kind == "sym_toeplitz":
            return self._full_ext_apply(v)
        return self._full_ext_apply(v[::-1])

    def _full_ext_apply(self, v: np.ndarray) -> np.ndarray:
        full = _cached_conv(self._fft_state()["ext"], v)
        return full[self.n - 1 : 2 * self.n - 1]

    def _cached_dense(self) -> np.ndarray:
        if self._dense is None:
            self._dense = _dense_from_generator(
                self.kind, self.k, self.n, self.generator, self.theta
            )
        return self._dense

    def _fft_state(self) -> dict:
        if self._fft is None:
            state = {}
            n, k = self.n, self.k
            if self.kind == "toeplitz":
                g = self.generator
                state["fwd"] = _conv_plan(g, n)
                state["adj"] = _conv_plan(g[::-1], k)
            else:
                state["ext"] = _conv_plan(_mirror_profile(self.generator), n)
            self._fft = state
        return self._fft

    # -- serialization ----------------------------------------------------

    def to_json(self, explicit_generator: bool = False) -> str:
        """JSON descriptor; theta is serialized 1-based to match the docs."""
        doc: dict = {
            "kind": self.kind,
            "k": self.k,
            "n": self.n,
            "compose_D": self.compose_D,
            "theta": None if self.theta is None else [int(t) + 1 for t in self.theta],
        }
        if self.dist is not None and self.seed is not None and not explicit_generator:
            doc["dist"] = {"kind": self.dist.kind, "k": self.dist.k}
            doc["seed"] = {
                "master_seed": self.seed.master_seed,
                "stream_id": self.seed.stream_id,
            }
        else:
            doc["generator"] = [float(v) for v in self.generator]
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MeasurementOperator":
        doc = json.loads(text)
        theta = doc.get("theta")
        if theta is not None:
            theta = [int(t) - 1 for t in theta]
        if "generator" in doc:
            return build_operator(
                doc["kind"],
                doc["k"],
                doc["n"],
                generator=doc["generator"],
                theta=theta,
                compose_D=doc.get("compose_D", False),
            )
        dist = DistributionSpec(doc["dist"]["kind"], doc["dist"]["k"])
        seed = SeedSpec(doc["seed"]["master_seed"], doc["seed"]["stream_id"])
        return build_operator(
            doc["kind"],
            doc["k"],
            doc["n"],
            dist=dist,
            seed=seed,
            theta=theta,
            compose_D=doc.get("compose_D", False),
        )

    def dense_csv(self) -> str:
        """Dense matrix as CSV text, for debugging."""
        rows = self.dense()
        return "\n".join(",".join(f"{v:.17g}" for v in row) for row in rows) + "\n"

    def __repr__(self):
        sub = f", |theta|={self.k}" if self.theta is not None else ""
        comp = ", *D" if self.compose_D else ""
        return f"<MeasurementOperator {self.kind} {self.k}x{self.n}{sub}{comp}>"


# -- dense kernels ---------------------------------------------------------


def _dense_from_generator(kind, k, n, gen, theta) -> np.ndarray:
    rows = theta if theta is not None else np.arange(k)
    cols = np.arange(n)
    if kind == "iid_dense":
        return gen.reshape(k, n).copy()
    if kind == "toeplitz":
        return gen[rows[:, None] - cols[None, :] + n - 1]
    if kind == "sym_toeplitz":
        return gen[n - 1 - np.abs(rows[:, None] - cols[None, :])]
    s = rows[:, None] + cols[None, :]
    return gen[np.where(s <= n - 1, s, 2 * n - 2 - s)]


def _dense_cols(kind, k, n, gen, theta, cols) -> np.ndarray:
    rows = theta if theta is not None else np.arange(k)
    if kind == "iid_dense":
        return gen.reshape(k, n)[:, cols].copy()
    if kind == "toeplitz":
        return gen[rows[:, None] - cols[None, :] + n - 1]
    if kind == "sym_toeplitz":
        return gen[n - 1 - np.abs(rows[:, None] - cols[None, :])]
    s = rows[:, None] + cols[None, :]
    return gen[np.where(s <= n - 1, s, 2 * n - 2 - s)]


# -- FFT plumbing -----------------------------------------------------------


def _conv_plan(profile: np.ndarray, in_len: int) -> dict:
    out_len = profile.size + in_len - 1
    nfft = next_fast_len(out_len)
    return {"nfft": nfft, "out_len": out_len, "pf": rfft(profile, nfft)}


def _cached_conv(plan: dict, x: np.ndarray) -> np.ndarray:
    full = irfft(plan["pf"] * rfft(x, plan["nfft"]), plan["nfft"])
    return full[: plan["out_len"]]


# -- public constructors -----------------------------------------------------


def build_operator(
    kind: str,
    k: int,
    n: int,
    *,
    generator=None,
    dist: DistributionSpec | None = None,
    seed: SeedSpec | None = None,
    theta=None,
    compose_D: bool = False,
    fast_threshold: int = DEFAULT_FAST_THRESHOLD,
) -> MeasurementOperator:
    """Build an operator from an explicit generator or a (dist, seed) pair.

    With (dist, seed) the generator is drawn through a dedicated stream and
    ``draws_consumed`` records exactly how many random scalars were used
    (n for symmetric kinds, n+k-1 for plain toeplitz, k*n for iid_dense).
    """
    if (generator is None) == (dist is None):
        raise ParameterError("pass exactly one of generator or (dist, seed)")
    draws = None
    if generator is None:
        if seed is None:
            raise ParameterError("building from a distribution requires a seed")
        stream = EntryStream(seed)
        generator = draw_sequence(dist, generator_length(kind, k, n), stream)
        draws = stream.draws
    op = MeasurementOperator(
        kind,
        k,
        n,
        np.asarray(generator, dtype=np.float64),
        theta=None if theta is None else np.asarray(theta, dtype=np.int64),
        compose_D=compose_D,
        dist=dist,
        seed=seed,
        fast_threshold=fast_threshold,
    )
    op.draws_consumed = draws
    return op


def build_L(n: int) -> np.ndarray:
    """Lower-triangular all-ones cumulative-sum matrix."""
    if n < 1:
        raise ParameterError("n must be positive")
    return np.tril(np.ones((n, n)))


def build_D(n: int) -> np.ndarray:
    """First-order differencing matrix, the exact inverse of build_L(n)."""
    if n < 1:
        raise ParameterError("n must be positive")
    return np.eye(n) - np.eye(n, k=-1)


# -- column norm audit -------------------------------------------------------


class ColumnNormReport:
    """Monte Carlo audit that E||column||^2 = 1 for an operator family."""

    def __init__(self, mean_sq, stderr, trials):
        self.mean_sq = mean_sq
        self.stderr = stderr
        self.trials = trials
        safe = np.where(stderr > 0, stderr, 1.0)
        self.z = (mean_sq - 1.0) / safe
        exact = (stderr == 0) & np.isclose(mean_sq, 1.0, rtol=0, atol=1e-12)
        self.all_pass = bool(np.all((np.abs(self.z) <= 3.0) | exact))


def column_norm_expectation_check(
    op: MeasurementOperator,
    dist: DistributionSpec | None = None,
    trials: int = 2000,
    seed: SeedSpec | None = None,
) -> ColumnNormReport:
    """Monte Carlo audit of the family ``op`` was drawn from: regenerate the
    operator ``trials`` times from ``dist`` and check that the mean squared
    column norm sits within 3 standard errors of 1 for every column.

    ``dist`` and ``seed`` default to the operator's own provenance."""
    dist = dist or op.dist
    if dist is None:
        raise ParameterError("operator has no distribution; pass dist explicitly")
    seed = seed or op.seed or SeedSpec(0, 0)
    kind, k, n = op.kind, op.k, op.n
    sq = np.zeros((trials, n))
    for r in range(trials):
        s = SeedSpec(seed.master_seed, seed.stream_id + r)
        gen = draw_sequence(dist, generator_length(kind, k, n), EntryStream(s))
        sq[r] = (_dense_from_generator(kind, k, n, gen, op.theta) ** 2).sum(axis=0)
    mean = sq.mean(axis=0)
    stderr = sq.std(axis=0, ddof=1) / np.sqrt(trials)
    return ColumnNormReport(mean, stderr, trials)
