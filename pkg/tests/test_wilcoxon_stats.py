import itertools

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from conftest import TABLE2
from errors import ArgumentError, DegenerateDataError
from wilcoxon_stats import (
    EXACT,
    NORMAL,
    WilcoxonResult,
    format_result,
    signed_rank_counts,
    significance,
    wilcoxon_signed_rank,
)


def brute_exact_p(v: int, n: int) -> float:
    """
    枚举 2^n 种符号组合得到精确的双侧 p 值
    """
    sums = [sum(k for k, s in zip(range(1, n + 1), signs) if s) for signs in itertools.product((0, 1), repeat=n)]
    le = sum(1 for s in sums if s <= v)
    ge = sum(1 for s in sums if s >= v)
    return min(1.0, 2.0 * min(le, ge) / 2 ** n)


def test_signed_rank_counts():
    assert signed_rank_counts(0).tolist() == [1]
    assert signed_rank_counts(3).tolist() == [1, 1, 1, 2, 1, 1, 1]
    for n in (5, 12, 25):
        c = signed_rank_counts(n)
        assert c.sum() == 2 ** n
        np.testing.assert_array_equal(c, c[::-1])
    with pytest.raises(ArgumentError):
        signed_rank_counts(-1)


def test_all_positive_small_sample():
    r = wilcoxon_signed_rank([2.0, 3.0, 4.0], [1.0, 1.0, 1.0])
    assert r.v_statistic == 6
    assert r.method == EXACT
    assert r.p_two_sided == 0.25


@pytest.mark.parametrize("seed", range(200))
def test_exact_p_matches_enumeration(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(1, 13))
    a = r.normal(size=n)
    b = r.normal(size=n)
    res = wilcoxon_signed_rank(a, b)
    assert res.method == EXACT
    assert res.n_effective == n
    d = a - b
    ranks = stats.rankdata(np.abs(d))
    v = int(ranks[d > 0].sum())
    assert res.v_statistic == v
    assert res.p_two_sided == brute_exact_p(v, n)


def test_published_tree_vs_lime():
    df = pd.read_csv(TABLE2)
    res = wilcoxon_signed_rank(df.iloc[:, 3], df.iloc[:, 4])
    assert res.n_effective == 15
    assert res.v_statistic == 20
    assert res.method == EXACT
    assert res.p_two_sided == brute_exact_p(20, 15)
    assert res.p_two_sided == pytest.approx(0.0215, abs=5e-4)
    assert significance(res)


def test_published_mlr_vs_lime():
    df = pd.read_csv(TABLE2)
    res = wilcoxon_signed_rank(df.iloc[:, 2], df.iloc[:, 4])
    assert res.v_statistic == 39
    assert res.method == EXACT
    assert res.p_two_sided == brute_exact_p(39, 15)
    assert res.p_two_sided == pytest.approx(0.252, abs=5e-3)
    assert not significance(res)


def test_ties_use_normal_approximation():
    a = np.array([1.0, 2.0, 2.0, 5.0, 3.0, 7.0, 0.5, 4.0, 4.0, 6.0])
    b = np.array([0.0, 1.0, 3.0, 5.0, 1.0, 4.0, 1.5, 1.0, 5.0, 2.0])
    res = wilcoxon_signed_rank(a, b)
    assert res.method == NORMAL
    assert res.n_effective == 9
    expected = stats.wilcoxon(a, b, zero_method="wilcox", correction=True, method="approx").pvalue
    assert res.p_two_sided == pytest.approx(expected, rel=1e-9)


def test_large_sample_uses_normal_approximation():
    r = np.random.default_rng(42)
    a = r.normal(size=40)
    b = r.normal(loc=0.3, size=40)
    res = wilcoxon_signed_rank(a, b)
    assert res.method == NORMAL
    expected = stats.wilcoxon(a, b, zero_method="wilcox", correction=True, method="approx").pvalue
    assert res.p_two_sided == pytest.approx(expected, rel=1e-9)


def test_swapping_samples_mirrors_statistic():
    r = np.random.default_rng(3)
    a, b = r.normal(size=14), r.normal(size=14)
    ab = wilcoxon_signed_rank(a, b)
    ba = wilcoxon_signed_rank(b, a)
    assert ab.v_statistic + ba.v_statistic == 14 * 15 / 2
    assert ab.p_two_sided == ba.p_two_sided


def test_zero_differences_are_dropped():
    res = wilcoxon_signed_rank([1.0, 2.0, 3.0, 4.0], [1.0, 0.0, 3.0, 1.0])
    assert res.n_effective == 2
    with pytest.raises(DegenerateDataError):
        wilcoxon_signed_rank([1.0, 2.0], [1.0, 2.0])


def test_input_errors():
    with pytest.raises(ArgumentError):
        wilcoxon_signed_rank([1.0, 2.0], [1.0])
    with pytest.raises(ArgumentError):
        wilcoxon_signed_rank([], [])


def test_significance_is_strict():
    at = WilcoxonResult(n_effective=10, v_statistic=5.0, p_two_sided=0.05, method=EXACT)
    below = WilcoxonResult(n_effective=10, v_statistic=5.0, p_two_sided=0.0499, method=EXACT)
    assert not significance(at, 0.05)
    assert significance(below, 0.05)
    with pytest.raises(ArgumentError):
        significance(at, 1.5)


def test_format_result():
    res = WilcoxonResult(n_effective=15, v_statistic=20.0, p_two_sided=0.02155, method=EXACT)
    text = format_result(res)
    assert text.startswith("V=20, p=0.02155, method=exact")
    assert text.endswith("significant at 0.05: yes")
    assert format_result(res, alpha=0.01).endswith("significant at 0.01: no")
