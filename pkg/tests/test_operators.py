import json

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from toepsense.operators import (
    KINDS,
    MeasurementOperator,
    build_D,
    build_L,
    build_operator,
    column_norm_expectation_check,
    generator_length,
)
from toepsense.randgen import DistributionSpec, ParameterError, SeedSpec


def gaussian_op(kind, k, n, seed=0, stream=0, **kwargs):
    return build_operator(
        kind, k, n, dist=DistributionSpec("gaussian", k),
        seed=SeedSpec(seed, stream), **kwargs,
    )


def sym_pattern_oracle(a, k):
    # full symmetric Toeplitz with first row (a_n .. a_1), via scipy
    rev = a[::-1]
    return scipy.linalg.toeplitz(rev, rev)[:k]


def left_pattern_oracle(a, k):
    # reflected Hankel with first row (a_1 .. a_n), via scipy
    return scipy.linalg.hankel(a, a[::-1])[:k]


@pytest.mark.parametrize("n", range(1, 9))
def test_entry_rules_exhaustive(n):
    a = np.linspace(1.0, 2.0, n) ** 2  # distinct sentinel values
    for k in range(1, n + 1):
        sym = build_operator("sym_toeplitz", k, n, generator=a).dense()
        assert np.array_equal(sym, sym_pattern_oracle(a, k))
        left = build_operator("left_sym_toeplitz", k, n, generator=a).dense()
        assert np.array_equal(left, left_pattern_oracle(a, k))


def test_display_examples():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    sym = build_operator("sym_toeplitz", 2, 4, generator=a).dense()
    assert np.array_equal(sym, [[4, 3, 2, 1], [3, 4, 3, 2]])
    left = build_operator("left_sym_toeplitz", 2, 4, generator=a).dense()
    assert np.array_equal(left, [[1, 2, 3, 4], [2, 3, 4, 3]])


def test_entry_accessor_matches_dense():
    for kind in KINDS:
        op = gaussian_op(kind, 4, 7, stream=KINDS.index(kind))
        dense = op.dense()
        for i in range(4):
            for j in range(7):
                assert op.entry(i, j) == dense[i, j]


def test_toeplitz_diagonal_constancy():
    for kind in ("toeplitz", "sym_toeplitz"):
        op = gaussian_op(kind, 5, 9)
        dense = op.dense()
        for i in range(4):
            for j in range(8):
                assert dense[i, j] == dense[i + 1, j + 1]


def test_square_extension_symmetry():
    op = gaussian_op("sym_toeplitz", 8, 8)
    dense = op.dense()
    assert np.array_equal(dense, dense.T)


def test_theta_selects_rows_of_full_extension():
    a = np.arange(1.0, 6.0)
    full = build_operator("sym_toeplitz", 5, 5, generator=a).dense()
    sub = build_operator("sym_toeplitz", 2, 5, generator=a, theta=[0, 2]).dense()
    assert np.array_equal(sub, full[[0, 2]])
    full_l = build_operator("left_sym_toeplitz", 5, 5, generator=a).dense()
    sub_l = build_operator("left_sym_toeplitz", 3, 5, generator=a, theta=[1, 3, 4]).dense()
    assert np.array_equal(sub_l, full_l[[1, 3, 4]])


def test_apply_identity():
    op = build_operator("iid_dense", 4, 4, generator=np.eye(4).ravel())
    x = np.array([3.0, -1.0, 2.0, 0.5])
    assert np.array_equal(op.apply(x), x)
    assert np.array_equal(op.apply_adjoint(x), x)


def test_apply_first_column():
    op = build_operator("sym_toeplitz", 2, 4, generator=np.array([1.0, 2.0, 3.0, 4.0]))
    assert np.array_equal(op.apply([1, 0, 0, 0]), [4.0, 3.0])


@pytest.mark.parametrize("kind", ["toeplitz", "sym_toeplitz", "left_sym_toeplitz"])
@pytest.mark.parametrize("k,n", [(32, 128), (17, 300), (128, 512)])
def test_fast_apply_matches_dense(kind, k, n):
    op = gaussian_op(kind, k, n, stream=k + n, fast_threshold=0)
    dense = op.dense()
    rng = np.random.default_rng(k * n)
    for _ in range(3):
        x = rng.standard_normal(n)
        ref = dense @ x
        assert np.linalg.norm(op.apply(x) - ref) <= 1e-12 * np.linalg.norm(ref)
        y = rng.standard_normal(k)
        ref_t = dense.T @ y
        assert np.linalg.norm(op.apply_adjoint(y) - ref_t) <= 1e-12 * np.linalg.norm(ref_t)


def test_fast_apply_with_theta():
    rng = np.random.default_rng(5)
    theta = np.sort(rng.choice(300, size=40, replace=False))
    for kind in ("sym_toeplitz", "left_sym_toeplitz"):
        op = gaussian_op(kind, 40, 300, stream=1, theta=theta, fast_threshold=0)
        dense = op.dense()
        x = rng.standard_normal(300)
        assert np.allclose(op.apply(x), dense @ x, atol=1e-12)
        y = rng.standard_normal(40)
        assert np.allclose(op.apply_adjoint(y), dense.T @ y, atol=1e-12)


def test_adjoint_pairing():
    rng = np.random.default_rng(7)
    for trial in range(100):
        kind = KINDS[trial % 4]
        n = int(rng.integers(4, 64))
        k = int(rng.integers(1, n + 1))
        op = gaussian_op(kind, k, n, stream=trial, fast_threshold=0 if trial % 2 else 256)
        x = rng.standard_normal(n)
        y = rng.standard_normal(k)
        lhs = np.dot(op.apply(x), y)
        rhs = np.dot(x, op.apply_adjoint(y))
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs), 1.0)


def test_compose_D_semantics():
    n, k = 12, 5
    op = gaussian_op("sym_toeplitz", k, n, compose_D=True)
    base = MeasurementOperator(op.kind, k, n, op.generator)
    ad = base.dense() @ build_D(n)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(n)
    assert np.allclose(op.apply(x), ad @ x, atol=1e-12)
    y = rng.standard_normal(k)
    assert np.allclose(op.apply_adjoint(y), ad.T @ y, atol=1e-12)
    assert np.allclose(op.dense(), ad, atol=0)
    assert np.allclose(op.dense_columns(np.arange(n)), ad, atol=0)


def test_L_and_D_identities():
    assert np.array_equal(build_L(3), [[1, 0, 0], [1, 1, 0], [1, 1, 1]])
    for n in (1, 2, 3, 8, 64):
        assert np.array_equal(build_D(n) @ build_L(n), np.eye(n))
    rng = np.random.default_rng(1)
    theta = rng.standard_normal(8)
    assert np.allclose(build_L(8) @ theta, np.cumsum(theta), atol=0)


def test_generator_economy():
    sym = gaussian_op("sym_toeplitz", 16, 64)
    plain = gaussian_op("toeplitz", 16, 64)
    assert sym.draws_consumed == 64
    assert plain.draws_consumed == 64 + 16 - 1
    assert generator_length("sym_toeplitz", 16, 64) == 64
    assert generator_length("toeplitz", 16, 64) == 79


def test_serialization_roundtrip_seeded():
    op = gaussian_op("sym_toeplitz", 3, 8, seed=9, stream=2)
    doc = op.to_json()
    clone = MeasurementOperator.from_json(doc)
    assert np.array_equal(clone.generator, op.generator)
    assert json.loads(doc)["seed"] == {"master_seed": 9, "stream_id": 2}


def test_serialization_roundtrip_explicit_theta():
    op = build_operator(
        "left_sym_toeplitz", 2, 5, generator=np.arange(5.0), theta=[0, 3], compose_D=True
    )
    doc = json.loads(op.to_json())
    assert doc["theta"] == [1, 4]  # 1-based on the wire
    clone = MeasurementOperator.from_json(json.dumps(doc))
    assert np.array_equal(clone.dense(), op.dense())
    assert clone.compose_D


def test_dense_csv():
    op = build_operator("sym_toeplitz", 2, 3, generator=np.array([1.0, 2.0, 3.0]))
    rows = op.dense_csv().strip().split("\n")
    parsed = np.array([[float(v) for v in r.split(",")] for r in rows])
    assert np.array_equal(parsed, op.dense())


def test_construction_errors():
    with pytest.raises(ParameterError):
        build_operator("sym_toeplitz", 5, 4, generator=np.arange(4.0))  # k > n
    with pytest.raises(ParameterError):
        build_operator("sym_toeplitz", 2, 4, generator=np.arange(3.0))  # bad length
    with pytest.raises(ParameterError):
        build_operator("toeplitz", 2, 4, generator=np.arange(5.0), theta=[0, 1])
    with pytest.raises(ParameterError):
        build_operator("sym_toeplitz", 2, 4, generator=np.arange(4.0), theta=[1, 1])
    with pytest.raises(ParameterError):
        build_operator("sym_toeplitz", 2, 4, generator=np.arange(4.0), theta=[3, 1])
    with pytest.raises(ParameterError):
        gaussian_op("sym_toeplitz", 2, 4).apply(np.zeros(5))
    with pytest.raises(ParameterError):
        gaussian_op("sym_toeplitz", 2, 4).apply_adjoint(np.zeros(3))
    with pytest.raises(ParameterError):
        build_operator("sym_toeplitz", 2, 4)


def test_column_norm_check_rademacher_exact():
    op = build_operator(
        "sym_toeplitz", 4, 10,
        dist=DistributionSpec("rademacher", 4), seed=SeedSpec(20, 0),
    )
    report = column_norm_expectation_check(op, trials=50)
    assert report.all_pass
    assert np.allclose(report.mean_sq, 1.0, atol=1e-12)


def test_column_norm_check_gaussian():
    op = build_operator(
        "sym_toeplitz", 20, 50,
        dist=DistributionSpec("gaussian", 20), seed=SeedSpec(21, 0),
    )
    assert column_norm_expectation_check(op, trials=2000).all_pass


def test_column_norm_check_ternary():
    op = build_operator(
        "toeplitz", 30, 40,
        dist=DistributionSpec("ternary", 30), seed=SeedSpec(22, 0),
    )
    assert column_norm_expectation_check(op, trials=2000).all_pass


def test_column_norm_check_requires_distribution():
    op = build_operator("sym_toeplitz", 2, 4, generator=np.arange(4.0))
    with pytest.raises(ParameterError, match="dist"):
        column_norm_expectation_check(op, trials=10)


@settings(max_examples=30, deadline=None)
@given(
    kind=st.sampled_from(KINDS),
    n=st.integers(min_value=1, max_value=24),
    data=st.data(),
)
def test_apply_always_matches_dense(kind, n, data):
    k = data.draw(st.integers(min_value=1, max_value=n))
    seed = data.draw(st.integers(min_value=0, max_value=10**6))
    op = gaussian_op(kind, k, n, seed=seed, fast_threshold=0)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    assert np.allclose(op.apply(x), op.dense() @ x, atol=1e-11)
