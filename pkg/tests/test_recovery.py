import itertools

import numpy as np
import pytest

from toepsense.operators import build_operator
from toepsense.randgen import (
    DistributionSpec,
    ParameterError,
    SeedSpec,
    draw_rademacher_spikes,
)
from toepsense.recovery import (
    SolverConfig,
    basis_pursuit,
    dual_certificate_inf_norm,
    judge_success,
    mse_frobenius,
    omp,
    trace_to_csv,
)
from toepsense.signals import SparseSignal


def gaussian_op(kind, k, n, seed=0, stream=0, **kwargs):
    return build_operator(
        kind, k, n, dist=DistributionSpec("gaussian", k),
        seed=SeedSpec(seed, stream), **kwargs,
    )


def vertex_l1_oracle(dense, y):
    """Brute-force LP oracle for k x n systems with k small: the l1 optimum
    is attained at a basic solution, so scan every size-k support."""
    k, n = dense.shape
    best = np.inf
    for supp in itertools.combinations(range(n), k):
        sub = dense[:, supp]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        x_s = np.linalg.solve(sub, y)
        best = min(best, float(np.abs(x_s).sum()))
    return best


def test_square_invertible_system():
    op = gaussian_op("sym_toeplitz", 8, 8, stream=1)
    rng = np.random.default_rng(0)
    x_ref = rng.standard_normal(8)
    y = op.dense() @ x_ref
    res = basis_pursuit(op, y)
    assert res.converged
    assert np.linalg.norm(res.x_hat - x_ref) <= 1e-6 * np.linalg.norm(x_ref)


def test_one_sparse_recovery_with_scan_oracle():
    op = gaussian_op("iid_dense", 8, 16, stream=2)
    dense = op.dense()
    truth = SparseSignal(n=16, support=np.array([11]), values=np.array([2.5]))
    y = dense @ truth.to_dense()
    # oracle: best single-atom least-squares fit identifies a unique support
    errs = []
    for j in range(16):
        c = float(dense[:, j] @ y) / float(dense[:, j] @ dense[:, j])
        errs.append(np.linalg.norm(c * dense[:, j] - y))
    assert int(np.argmin(errs)) == 11
    assert sorted(errs)[0] < 1e-10 < sorted(errs)[1]
    res = basis_pursuit(op, y)
    rel = np.linalg.norm(res.x_hat - truth.to_dense()) / np.linalg.norm(truth.to_dense())
    assert rel <= 1e-4


def test_l1_value_matches_vertex_oracle():
    for stream in range(10):
        op = gaussian_op("iid_dense", 3, 6, stream=stream)
        x = draw_rademacher_spikes(6, 2, SeedSpec(50, stream))
        y = op.apply(x.to_dense())
        res = basis_pursuit(op, y)
        oracle = vertex_l1_oracle(op.dense(), y)
        assert res.l1_value <= oracle + 1e-6
        assert res.l1_value >= oracle - 1e-6


def test_dual_certificate_on_recovered_support():
    for stream in range(10):
        op = gaussian_op("iid_dense", 32, 64, stream=stream)
        x = draw_rademacher_spikes(64, 3, SeedSpec(60, stream))
        res = basis_pursuit(op, op.apply(x.to_dense()))
        inf_norm, fit = dual_certificate_inf_norm(op, res.x_hat, nu0=res.dual)
        assert fit <= 1e-6
        assert inf_norm <= 1.0 + 1e-6


def test_solver_determinism():
    op = gaussian_op("sym_toeplitz", 24, 96, stream=3)
    x = draw_rademacher_spikes(96, 4, SeedSpec(61, 0))
    y = op.apply(x.to_dense())
    cfg = SolverConfig(trace=True, max_iters=400)
    r1 = basis_pursuit(op, y, cfg)
    r2 = basis_pursuit(op, y, cfg)
    assert np.array_equal(r1.x_hat, r2.x_hat)
    assert r1.trace == r2.trace


def test_residual_recomputed_post_hoc():
    op = gaussian_op("sym_toeplitz", 16, 48, stream=4)
    x = draw_rademacher_spikes(48, 3, SeedSpec(62, 0))
    y = op.apply(x.to_dense())
    res = basis_pursuit(op, y)
    assert res.residual == pytest.approx(
        float(np.linalg.norm(op.apply(res.x_hat) - y)), abs=0
    )
    assert res.l1_value == pytest.approx(float(np.abs(res.x_hat).sum()), abs=0)


def test_non_convergence_flag_on_tiny_budget():
    op = gaussian_op("sym_toeplitz", 20, 80, stream=5)
    x = draw_rademacher_spikes(80, 10, SeedSpec(63, 0))
    res = basis_pursuit(op, op.apply(x.to_dense()), SolverConfig(max_iters=5))
    assert not res.converged
    assert res.iters == 5


def test_trace_csv():
    op = gaussian_op("sym_toeplitz", 8, 16, stream=6)
    res = basis_pursuit(op, op.apply(np.ones(16) * 0.1), SolverConfig(trace=True, max_iters=50))
    text = trace_to_csv(res.trace)
    lines = text.strip().split("\n")
    assert lines[0] == "iteration,residual,l1_value"
    assert len(lines) == len(res.trace) + 1


def test_solver_input_validation():
    op = gaussian_op("sym_toeplitz", 4, 8)
    with pytest.raises(ParameterError):
        basis_pursuit(op, np.zeros(5))
    with pytest.raises(ParameterError):
        basis_pursuit(op, np.array([np.nan, 0, 0, 0]))
    with pytest.raises(ParameterError):
        SolverConfig(max_iters=0)
    with pytest.raises(ParameterError):
        SolverConfig(feas_tol=0.0)


# -- OMP ------------------------------------------------------------------------


def test_omp_single_column():
    op = gaussian_op("iid_dense", 16, 32, stream=7)
    y = op.dense()[:, 5]
    res = omp(op, y, m_max=4)
    assert res.iters == 1
    assert np.flatnonzero(np.abs(res.x_hat) > 1e-9).tolist() == [5]
    assert res.x_hat[5] == pytest.approx(1.0, abs=1e-9)


def test_omp_zero_input():
    op = gaussian_op("iid_dense", 8, 16, stream=8)
    res = omp(op, np.zeros(8), m_max=3)
    assert res.iters == 0
    assert np.array_equal(res.x_hat, np.zeros(16))


def test_omp_bp_agreement_batch():
    agree = 0
    trials = 30
    for t in range(trials):
        op = gaussian_op("iid_dense", 32, 64, stream=100 + t)
        x = draw_rademacher_spikes(64, 3, SeedSpec(70, t))
        y = op.apply(x.to_dense())
        bp = basis_pursuit(op, y)
        gr = omp(op, y, m_max=3)
        if np.linalg.norm(bp.x_hat - gr.x_hat) <= 1e-4 * max(np.linalg.norm(gr.x_hat), 1.0):
            agree += 1
    assert agree >= trials - 1


def test_omp_validation():
    op = gaussian_op("iid_dense", 8, 16)
    with pytest.raises(ParameterError):
        omp(op, np.zeros(7), m_max=2)
    with pytest.raises(ParameterError):
        omp(op, np.zeros(8), m_max=0)
    with pytest.raises(ParameterError):
        omp(op, np.zeros(8), m_max=9)


# -- judging ---------------------------------------------------------------------


def test_judge_exact():
    x = draw_rademacher_spikes(32, 4, SeedSpec(80, 0))
    assert judge_success(x, x.to_dense())


def test_judge_perturbed_false():
    sig = draw_rademacher_spikes(512, 20, SeedSpec(81, 0))
    x_hat = sig.to_dense()
    x_hat[0] += 0.5
    # ||x|| = sqrt(20): relative error 0.5/sqrt(20) = 0.1118 > 1e-3
    assert not judge_success(sig, x_hat)


def test_judge_closed_threshold():
    sig = SparseSignal(n=4, support=np.array([0]), values=np.array([1.0]))
    x_hat = sig.to_dense()
    x_hat[1] = 1e-3  # relative error exactly the threshold
    assert judge_success(sig, x_hat, success_rel_tol=1e-3)


def test_judge_zero_truth_absolute():
    sig = SparseSignal(n=4, support=np.array([], dtype=int), values=np.array([]))
    assert judge_success(sig, np.full(4, 1e-4), success_rel_tol=1e-3)
    assert not judge_success(sig, np.full(4, 1e-2), success_rel_tol=1e-3)


def test_mse_frobenius():
    m = np.arange(1.0, 7.0).reshape(2, 3)
    assert mse_frobenius(m, m) == 0.0
    assert mse_frobenius(2 * m, m) == pytest.approx(1.0, rel=1e-14)
    e = np.zeros_like(m)
    e[0, 0] = np.linalg.norm(m)
    assert mse_frobenius(m + e, m) == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(ParameterError):
        mse_frobenius(m, np.zeros_like(m))
    with pytest.raises(ParameterError):
        mse_frobenius(m, np.zeros((3, 2)))
