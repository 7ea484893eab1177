"""Sparse recovery: l1 basis pursuit (primal-dual splitting) and a greedy
matching-pursuit cross-check, plus the success criterion used by the
experiment harness.

The model is noiseless, y = A x exactly.  The basis-pursuit solver is
matrix-free: it touches the operator only through apply / apply_adjoint, so
the fast Toeplitz path carries through.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .operators import MeasurementOperator
from .randgen import ParameterError
from .signals import SparseSignal


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the primal-dual basis-pursuit scheme.

    Step sizes default to 0.99/||A|| from a power-iteration estimate; setting
    tau/sigma overrides that.  The solver exits early once the relative
    residual reaches feas_tol and the relative iterate change drops below
    change_tol.
    """

    max_iters: int = 20000
    feas_tol: float = 1e-8
    change_tol: float = 1e-10
    tau: float | None = None
    sigma: float | None = None
    step_scale: float = 0.99
    success_rel_tol: float = 1e-3
    check_every: int = 25
    trace: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ParameterError("max_iters must be positive")
        for name in ("feas_tol", "change_tol", "step_scale", "success_rel_tol"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be > 0")


@dataclass
class RecoveryResult:
    """Solver output; residual and l1 value are recomputed from x_hat."""

    x_hat: np.ndarray = field(repr=False)
    iters: int
    residual: float
    l1_value: float
    converged: bool
    success: bool | None = None
    trace: list | None = field(default=None, repr=False)
    dual: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> str:
        doc = {
            "x_hat": [float(v) for v in self.x_hat],
            "iters": self.iters,
            "residual": self.residual,
            "l1_value": self.l1_value,
            "converged": self.converged,
            "success": self.success,
        }
        return json.dumps(doc, sort_keys=True)


def trace_to_csv(trace: list) -> str:
    """Per-iteration trace rows (iteration, residual, l1 value) as CSV."""
    lines = ["iteration,residual,l1_value"]
    lines += [f"{it},{res:.17g},{l1:.17g}" for it, res, l1 in trace]
    return "\n".join(lines) + "\n"


def operator_norm(op: MeasurementOperator, iters: int = 100, tol: float = 1e-7) -> float:
    """Spectral norm estimate by power iteration on A^T A (deterministic
    fixed start vector)."""
    v = np.full(op.n, 1.0 / math.sqrt(op.n))
    lam = 0.0
    for _ in range(iters):
        w = op.apply_adjoint(op.apply(v))
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v_next = w / norm
        if abs(norm - lam) <= tol * max(norm, 1.0):
            lam = norm
            break
        lam = norm
        v = v_next
    return math.sqrt(lam)


def _shrink(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _finish(op, x, y, iters, converged, cfg, trace, dual=None):
    residual = float(np.linalg.norm(op.apply(x) - y))
    return RecoveryResult(
        x_hat=x,
        iters=iters,
        residual=residual,
        l1_value=float(np.abs(x).sum()),
        converged=converged,
        trace=trace if cfg.trace else None,
        dual=dual,
    )


def basis_pursuit(
    op: MeasurementOperator, y: np.ndarray, cfg: SolverConfig | None = None
) -> RecoveryResult:
    """min ||x||_1 subject to y = A x.

    Primal-dual splitting: soft-thresholding proximal step on x, dual ascent
    on the equality constraint, over-relaxation 2x_new - x.  A square system
    (k = n) has a singleton feasible set, so it is solved directly and the
    iterative scheme is kept as a fallback for singular square matrices.
    """
    cfg = cfg or SolverConfig()
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (op.k,):
        raise ParameterError(f"y must have length k={op.k}")
    if not np.all(np.isfinite(y)):
        raise ParameterError("y must be finite")
    y_norm = float(np.linalg.norm(y))
    scale = y_norm if y_norm > 0 else 1.0
    trace: list = []

    if op.k == op.n:
        dense = op.dense()
        try:
            x = np.linalg.solve(dense, y)
        except np.linalg.LinAlgError:
            x = None
        if x is not None and np.all(np.isfinite(x)):
            if np.linalg.norm(dense @ x - y) <= cfg.feas_tol * scale:
                return _finish(op, x, y, 0, True, cfg, trace)

    norm_a = operator_norm(op)
    if norm_a == 0.0:
        return _finish(op, np.zeros(op.n), y, 0, y_norm == 0.0, cfg, trace)
    tau = cfg.tau if cfg.tau is not None else cfg.step_scale / norm_a
    sigma = cfg.sigma if cfg.sigma is not None else cfg.step_scale / norm_a
    if tau <= 0 or sigma <= 0 or tau * sigma * norm_a**2 > 1.0 + 1e-9:
        raise ParameterError(
            f"step sizes violate tau*sigma*||A||^2 <= 1 (got {tau * sigma * norm_a**2:.3g})"
        )

    x = np.zeros(op.n)
    nu = np.zeros(op.k)
    converged = False
    iters = 0
    for it in range(1, cfg.max_iters + 1):
        iters = it
        x_old = x
        x = _shrink(x - tau * op.apply_adjoint(nu), tau)
        ax = op.apply(2.0 * x - x_old)
        nu = nu + sigma * (ax - y)
        if cfg.trace:
            trace.append((it, float(np.linalg.norm(op.apply(x) - y)), float(np.abs(x).sum())))
        if it % cfg.check_every == 0 or it == cfg.max_iters:
            res = float(np.linalg.norm(op.apply(x) - y))
            change = float(np.linalg.norm(x - x_old))
            x_scale = max(float(np.linalg.norm(x)), 1e-30)
            if res <= cfg.feas_tol * scale and change <= cfg.change_tol * x_scale:
                converged = True
                break
    # sign convention: (A^T dual) on the support equals sign(x_hat) there
    return _finish(op, x, y, iters, converged, cfg, trace, dual=-nu)


def omp(
    op: MeasurementOperator,
    y: np.ndarray,
    m_max: int,
    residual_tol: float = 1e-10,
) -> RecoveryResult:
    """Orthogonal matching pursuit: grow the support by the largest absolute
    correlation of A^T r (normalized by column norm, since columns are
    unit-norm only in expectation), least-squares refit on the support each
    step, stop at residual_tol (relative to ||y||) or m_max atoms."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (op.k,):
        raise ParameterError(f"y must have length k={op.k}")
    if not 1 <= m_max <= op.k:
        raise ParameterError("need 1 <= m_max <= k")
    y_norm = float(np.linalg.norm(y))
    x = np.zeros(op.n)
    if y_norm == 0.0:
        return RecoveryResult(
            x_hat=x, iters=0, residual=0.0, l1_value=0.0, converged=True
        )
    col_norms = np.sqrt((op.dense_columns(np.arange(op.n)) ** 2).sum(axis=0))
    col_norms[col_norms == 0.0] = 1.0
    support: list[int] = []
    r = y.copy()
    for _ in range(m_max):
        corr = op.apply_adjoint(r) / col_norms
        corr[support] = 0.0
        j = int(np.argmax(np.abs(corr)))
        if corr[j] == 0.0:
            break
        support.append(j)
        cols = op.dense_columns(np.asarray(sorted(support)))
        gram = cols.T @ cols
        rhs = cols.T @ y
        try:
            coef = cho_solve(cho_factor(gram), rhs)
        except np.linalg.LinAlgError:
            coef, *_ = np.linalg.lstsq(cols, y, rcond=None)
        r = y - cols @ coef
        if np.linalg.norm(r) <= residual_tol * y_norm:
            break
    x = np.zeros(op.n)
    if support:
        x[np.asarray(sorted(support))] = coef
    residual = float(np.linalg.norm(op.apply(x) - y))
    return RecoveryResult(
        x_hat=x,
        iters=len(support),
        residual=residual,
        l1_value=float(np.abs(x).sum()),
        converged=bool(residual <= residual_tol * y_norm or len(support) == m_max),
    )


def judge_success(
    x_true: SparseSignal, x_hat: np.ndarray, success_rel_tol: float = 1e-3
) -> bool:
    """True iff ||x_hat - x||_2 / ||x||_2 <= tol (closed threshold); an
    all-zero truth is judged on the absolute norm of x_hat."""
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x_hat.shape != (x_true.n,):
        raise ParameterError("ambient dimensions differ")
    truth = x_true.to_dense()
    t_norm = float(np.linalg.norm(truth))
    err = float(np.linalg.norm(x_hat - truth))
    if t_norm == 0.0:
        return err <= success_rel_tol
    return err / t_norm <= success_rel_tol


def mse_frobenius(X: np.ndarray, M: np.ndarray) -> float:
    """||X - M||_F / ||M||_F."""
    X = np.asarray(X, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    if X.shape != M.shape:
        raise ParameterError("shapes differ")
    m_norm = float(np.linalg.norm(M))
    if m_norm == 0.0:
        raise ParameterError("reference has zero Frobenius norm")
    return float(np.linalg.norm(X - M)) / m_norm


def dual_certificate_inf_norm(
    op: MeasurementOperator,
    x_hat: np.ndarray,
    nu0: np.ndarray | None = None,
    rel_tol: float = 1e-3,
):
    """Least-squares dual fit for the support of x_hat.

    Fits nu with A_S^T nu = sign(x_S) on the significant support (components
    above rel_tol times the largest) and returns (||A^T nu||_inf,
    fit_residual).  When ``nu0`` is given (the basis-pursuit dual iterate)
    the fit is the minimum-norm correction of nu0, which keeps the
    certificate near the solver's own dual; for an l1-optimal x_hat the fit
    is consistent and the infinity norm is at most 1 (numerically 1 + eps).
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    peak = float(np.abs(x_hat).max()) if x_hat.size else 0.0
    support = np.flatnonzero(np.abs(x_hat) > rel_tol * peak) if peak > 0 else np.array([], int)
    if support.size == 0:
        return 0.0, 0.0
    cols = op.dense_columns(support)
    signs = np.sign(x_hat[support])
    if nu0 is None:
        nu, *_ = np.linalg.lstsq(cols.T, signs, rcond=None)
    else:
        delta, *_ = np.linalg.lstsq(cols.T, signs - cols.T @ nu0, rcond=None)
        nu = nu0 + delta
    fit = float(np.linalg.norm(cols.T @ nu - signs))
    return float(np.abs(op.apply_adjoint(nu)).max()), fit
