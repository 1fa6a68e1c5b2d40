import numpy as np
import pytest

from siminfer.data import TwoGroupSample
from siminfer.moments import (
    PartialMoments,
    diff_in_means,
    grand_variance,
    group_variance,
    summarize,
)


def toy():
    return TwoGroupSample(
        np.array([3.0, 1.0, 7.0, 2.0, 5.0, 0.0]), np.array([1, 1, 1, 0, 0, 0])
    )


def test_basic_statistics():
    s = toy()
    assert diff_in_means(s) == pytest.approx((11 / 3) - (7 / 3))
    assert group_variance(s, 1) == pytest.approx(np.var([3, 1, 7], ddof=1))
    assert group_variance(s, 0) == pytest.approx(np.var([2, 5, 0], ddof=1))
    assert grand_variance(s) == pytest.approx(np.var([3, 1, 7, 2, 5, 0], ddof=1))


def test_grand_variance_exceeds_pooled_within_when_means_differ():
    s = toy()
    n = s.n
    ssw = (s.n1 - 1) * group_variance(s, 1) + (s.n0 - 1) * group_variance(s, 0)
    # decomposition: (n-1) s^2 = SSw + (n1 n0 / n) tau^2
    assert (n - 1) * grand_variance(s) == pytest.approx(
        ssw + s.n1 * s.n0 / n * diff_in_means(s) ** 2
    )
    assert grand_variance(s) > ssw / (n - 1)


def test_location_and_scale():
    s = toy()
    shifted = TwoGroupSample(s.outcomes + 100.0, s.assignments)
    scaled = TwoGroupSample(s.outcomes * 3.0, s.assignments)
    assert grand_variance(shifted) == pytest.approx(grand_variance(s), rel=1e-12)
    assert diff_in_means(shifted) == pytest.approx(diff_in_means(s), rel=1e-12)
    assert grand_variance(scaled) == pytest.approx(9 * grand_variance(s), rel=1e-12)


def test_summarize_matches_direct_moments():
    rng = np.random.default_rng(5)
    x = rng.gamma(2.0, size=5000)
    summ = summarize(x, "tag", 5)
    m = x.mean()
    c = x - m
    m2, m3, m4 = (c**2).mean(), (c**3).mean(), (c**4).mean()
    assert summ.mean == pytest.approx(m)
    assert summ.variance == pytest.approx(m2)
    assert summ.std_error == pytest.approx(np.sqrt(m2))
    assert summ.skewness == pytest.approx(m3 / m2**1.5, rel=1e-10)
    assert summ.excess_kurtosis == pytest.approx(m4 / m2**2 - 3.0, rel=1e-10)
    assert summ.replicate_count == 5000
    assert summ.method_tag == "tag" and summ.seed == 5
    assert not summ.degenerate


def test_summarize_degenerate_and_too_small():
    summ = summarize(np.full(10, 2.5), "tag", 0)
    assert summ.std_error == 0.0
    assert summ.skewness is None and summ.excess_kurtosis is None
    assert summ.degenerate
    with pytest.raises(ValueError):
        summarize(np.array([1.0]), "tag", 0)


def test_partial_moments_equal_whole_pass():
    rng = np.random.default_rng(11)
    x = rng.lognormal(size=40000)
    acc = PartialMoments()
    for chunk in np.array_split(x, 7):
        acc = acc.update(chunk)
    got = acc.finalize("tag", 1)
    want = summarize(x, "tag", 1)
    assert got.mean == pytest.approx(want.mean, rel=1e-12)
    assert got.variance == pytest.approx(want.variance, rel=1e-10)
    assert got.skewness == pytest.approx(want.skewness, rel=1e-8)
    assert got.excess_kurtosis == pytest.approx(want.excess_kurtosis, rel=1e-8)


def test_partial_moments_merge_is_associative_enough():
    # sequential fold and pairwise tree give the same answer
    rng = np.random.default_rng(3)
    chunks = [rng.normal(loc=i, size=503) for i in range(8)]
    parts = [PartialMoments().update(c) for c in chunks]
    seq = parts[0]
    for p in parts[1:]:
        seq = seq.merge(p)
    while len(parts) > 1:
        parts = [parts[i].merge(parts[i + 1]) for i in range(0, len(parts), 2)]
    tree = parts[0]
    assert seq.count == tree.count == 8 * 503
    assert seq.mean == pytest.approx(tree.mean, rel=1e-12)
    assert seq.m2 == pytest.approx(tree.m2, rel=1e-10)
    assert seq.m3 == pytest.approx(tree.m3, rel=1e-8, abs=1e-6)
    assert seq.m4 == pytest.approx(tree.m4, rel=1e-8)


def test_partial_moments_empty_and_identity():
    x = np.arange(10.0)
    acc = PartialMoments().update(x).update(np.array([]))
    assert acc.count == 10
    merged = PartialMoments().merge(PartialMoments().update(x))
    assert merged == PartialMoments().update(x)
    with pytest.raises(ValueError):
        PartialMoments().update(np.array([1.0])).finalize("tag", 0)
