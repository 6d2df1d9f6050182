import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from invrmt.classify import Category
from invrmt.herding import (binomial_herding_test, binomial_tail, daily_direction, herding_day_counts,
                            herding_days, herding_index, herding_row)
from invrmt.marketdata import InvestorType


def _enumerated_tail(k, n, upper):
    """Brute force over all 2^n buy/sell outcomes."""
    hits = sum(1 for w in itertools.product((0, 1), repeat=n) if (sum(w) >= k if upper else sum(w) <= k))
    return Fraction(hits, 2 ** n)


@pytest.mark.parametrize("n", range(0, 15))
def test_tail_matches_enumeration(n):
    for k in range(-1, n + 2):
        for upper in (True, False):
            assert abs(binomial_tail(k, n, upper) - float(_enumerated_tail(k, n, upper))) <= 1e-15


@given(st.integers(15, 20), st.integers(0, 20), st.booleans())
def test_tail_matches_exact_fraction(n, k, upper):
    ks = range(k, n + 1) if upper else range(0, min(k, n) + 1)
    exact = Fraction(sum(math.comb(n, j) for j in ks), 2 ** n)
    assert abs(binomial_tail(k, n, upper) - float(exact)) <= 1e-15


def test_large_n_uses_scipy():
    assert binomial_tail(1100, 2000) == pytest.approx(stats.binom.sf(1099, 2000, 0.5), rel=1e-12)
    assert binomial_tail(600, 1024) == pytest.approx(stats.binom.sf(599, 1024, 0.5), rel=1e-9)


def test_herding_examples():
    assert herding_index(3, 1) == 0.75
    with pytest.raises(ValueError):
        herding_index(0, 0)
    assert binomial_herding_test(10, 0) == ("buy", pytest.approx(2 ** -10))
    assert binomial_herding_test(0, 10)[0] == "sell"
    assert binomial_herding_test(5, 5)[0] == "none"
    assert daily_direction(3.0) == "buyer" and daily_direction(-1) == "seller" and daily_direction(0) == "inactive"


def test_herding_days_groups():
    v = np.array([[1, 2, 3, -1], [-1, -2, 0, 1], [0, 0, 0, 0]], dtype=float)
    types = ["ind", "ind", "ind", "ins"]
    cats = ["trending"] * 4
    days = herding_days(v, types, cats, ["d1", "d2", "d3"], "S")
    ind = [d for d in days if d.group == (Category.TRENDING, InvestorType.INDIVIDUAL)]
    assert [(d.n_plus, d.n_minus) for d in ind] == [(3, 0), (0, 2), (0, 0)]
    assert ind[2].h is None and ind[0].h == 1.0
    counts = herding_day_counts(v, types, cats, ["d1", "d2", "d3"], "S", alpha=0.2)
    assert counts["counts"][(Category.TRENDING, InvestorType.INDIVIDUAL)] == {"buy": 1, "sell": 0}
    row = herding_row(counts)
    assert row["trending_n+_d"] == 1 and row["reversing_n-_s"] == 0 and row["trading_days"] == 3


@given(st.integers(0, 30), st.integers(0, 30))
def test_tails_sum_to_one_plus_point_mass(k, n):
    if k > n:
        return
    total = binomial_tail(k, n, True) + binomial_tail(k, n, False)
    assert total == pytest.approx(1 + math.comb(n, k) / 2 ** n, abs=1e-14)
