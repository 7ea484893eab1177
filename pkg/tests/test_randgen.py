import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toepsense.randgen import (
    DistributionSpec,
    EntryStream,
    ParameterError,
    SeedSpec,
    draw_rademacher_spikes,
    draw_sequence,
    sample_without_replacement,
)

N_BIG = 100_000


def test_rademacher_values_forced():
    vals = draw_sequence(DistributionSpec("rademacher", 4), 3, SeedSpec(1, 0))
    assert set(np.unique(vals)) <= {0.5, -0.5}


def test_ternary_support_values():
    dist = DistributionSpec("ternary", 3)
    vals = draw_sequence(dist, 1000, SeedSpec(2, 0))
    allowed = {0.0, np.sqrt(1.0), -np.sqrt(1.0)}
    assert set(np.unique(vals)) <= allowed


def test_ternary_zero_fraction():
    vals = draw_sequence(DistributionSpec("ternary", 3), N_BIG, SeedSpec(3, 0))
    frac = np.mean(vals == 0.0)
    assert abs(frac - 2.0 / 3.0) <= 0.01


def test_gaussian_sample_variance():
    vals = draw_sequence(DistributionSpec("gaussian", 100), N_BIG, SeedSpec(4, 0))
    assert abs(np.var(vals) - 0.01) <= 0.0005


@pytest.mark.parametrize("kind", ["gaussian", "rademacher", "ternary"])
@pytest.mark.parametrize("k", [1, 7, 64])
def test_moments(kind, k):
    vals = draw_sequence(DistributionSpec(kind, k), N_BIG, SeedSpec(5, k))
    assert abs(vals.mean()) < 3.0 * np.sqrt(1.0 / (k * N_BIG))
    assert abs(np.var(vals) - 1.0 / k) < 0.05 / k


def test_reproducible_and_stream_independent():
    dist = DistributionSpec("gaussian", 10)
    a = draw_sequence(dist, 100, SeedSpec(7, 3))
    b = draw_sequence(dist, 100, SeedSpec(7, 3))
    c = draw_sequence(dist, 100, SeedSpec(7, 4))
    d = draw_sequence(dist, 100, SeedSpec(8, 3))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_draw_counting():
    stream = EntryStream(SeedSpec(1, 1))
    draw_sequence(DistributionSpec("ternary", 5), 17, stream)
    assert stream.draws == 17
    draw_sequence(DistributionSpec("gaussian", 5), 3, stream)
    assert stream.draws == 20


def test_spikes_basic():
    sig = draw_rademacher_spikes(512, 20, SeedSpec(11, 0))
    assert sig.n == 512
    assert sig.sparsity == 20
    assert set(np.unique(sig.values)) <= {1.0, -1.0}
    assert np.all(np.diff(sig.support) > 0)


def test_spikes_full_support():
    sig = draw_rademacher_spikes(5, 5, SeedSpec(11, 1))
    assert list(sig.support) == [0, 1, 2, 3, 4]


def test_spikes_support_uniformity():
    # n=8, m=1 over 1000 seeds: each index expected 125 +- 40
    counts = np.zeros(8)
    for s in range(1000):
        sig = draw_rademacher_spikes(8, 1, SeedSpec(123, s))
        counts[sig.support[0]] += 1
    assert counts.sum() == 1000
    assert np.all(np.abs(counts - 125) <= 40)


def test_sample_without_replacement_exact():
    stream = EntryStream(SeedSpec(0, 0))
    idx = sample_without_replacement(6, 6, stream)
    assert list(idx) == [0, 1, 2, 3, 4, 5]


def test_parameter_errors():
    with pytest.raises(ParameterError):
        DistributionSpec("gaussian", 0)
    with pytest.raises(ParameterError):
        DistributionSpec("uniform", 3)
    with pytest.raises(ParameterError):
        draw_sequence(DistributionSpec("gaussian", 3), 0, SeedSpec(0, 0))
    with pytest.raises(ParameterError):
        draw_rademacher_spikes(4, 5, SeedSpec(0, 0))
    with pytest.raises(ParameterError):
        SeedSpec(-1, 0)
    with pytest.raises(ParameterError):
        SeedSpec(0, -1)


@settings(max_examples=40, deadline=None)
@given(
    kind=st.sampled_from(["gaussian", "rademacher", "ternary"]),
    k=st.integers(min_value=1, max_value=50),
    n=st.integers(min_value=1, max_value=200),
    seed=st.integers(min_value=0, max_value=2**64 - 1),
    stream=st.integers(min_value=0, max_value=10**9),
)
def test_draw_sequence_contract(kind, k, n, seed, stream):
    dist = DistributionSpec(kind, k)
    spec = SeedSpec(seed, stream)
    vals = draw_sequence(dist, n, spec)
    assert vals.shape == (n,)
    assert np.all(np.isfinite(vals))
    assert np.array_equal(vals, draw_sequence(dist, n, spec))
    if kind == "ternary":
        lim = np.sqrt(3.0 / k)
        assert set(np.round(np.unique(np.abs(vals)), 12)) <= {0.0, round(lim, 12)}
