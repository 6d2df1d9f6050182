import numpy as np
import pytest
from hypothesis import given, strategies as st

from invrmt.classify import (Category, CategoryLabel, bootstrap_categorize, bootstrap_null, category_counts,
                             circular_block_indices, corr_with_return, linear_model_matrix,
                             sort_matrix_by_cvr, threshold_categorize)
from invrmt.errors import AlignmentError, DegenerateSeriesError, InsufficientDataError
from invrmt.marketdata import InvestorType
from invrmt.xcorr import correlation_matrix


def test_threshold_band():
    # N_T = 100 gives a band of 0.2
    assert threshold_categorize(0.25, 100).label == Category.TRENDING
    assert threshold_categorize(-0.25, 100).label == Category.REVERSING
    assert threshold_categorize(0.1, 100).label == Category.UNCATEGORIZED
    assert threshold_categorize(0.2, 100).label == Category.UNCATEGORIZED
    lab = threshold_categorize(0.3, 237, "a", InvestorType.INSTITUTION)
    assert lab.upper == pytest.approx(2 / np.sqrt(237)) and lab.gamma == 0.3 and lab.investor_id == "a"
    with pytest.raises(ValueError):
        threshold_categorize(0.0, 3)


@given(st.floats(-1, 1), st.integers(4, 10_000))
def test_threshold_antisymmetry(c, n):
    up, down = threshold_categorize(c, n).label, threshold_categorize(-c, n).label
    flip = {Category.TRENDING: Category.REVERSING, Category.REVERSING: Category.TRENDING,
            Category.UNCATEGORIZED: Category.UNCATEGORIZED}
    assert down == flip[up]


def test_corr_with_return_checks():
    r = np.array([1.0, 2.0, 0.0, 3.0])
    assert corr_with_return(2 * r, r) == pytest.approx(1.0)
    with pytest.raises(AlignmentError):
        corr_with_return(r[:3], r)
    with pytest.raises(DegenerateSeriesError):
        corr_with_return(np.ones(4), r)


def test_block_indices_are_circular_blocks():
    idx = circular_block_indices(np.random.default_rng(0), 50, 20, 5)
    assert idx.shape == (5, 50)
    steps = np.diff(idx, axis=1) % 50
    # within a block consecutive indices advance by one
    for row in steps:
        assert np.all(row[[k for k in range(49) if (k + 1) % 20]] == 1)


def test_bootstrap_null_reproducible_and_centered():
    rng = np.random.default_rng(1)
    v, r = rng.normal(size=240), rng.normal(size=240)
    a = bootstrap_null(v, r, 500, 20, seed=[3, 4])
    b = bootstrap_null(v, r, 500, 20, seed=[3, 4])
    np.testing.assert_array_equal(a, b)
    assert abs(a.mean()) < 0.02 and 0.04 < a.std() < 0.1


def test_bootstrap_categorize():
    rng = np.random.default_rng(2)
    r = rng.normal(size=240)
    strong = bootstrap_categorize(0.5 * r + rng.normal(size=240), r, seed=1)
    weak = bootstrap_categorize(-0.5 * r + rng.normal(size=240), r, seed=1)
    assert strong.label == Category.TRENDING and weak.label == Category.REVERSING
    assert strong.method == "bootstrap" and strong.lower < 0 < strong.upper
    with pytest.raises(InsufficientDataError):
        bootstrap_categorize(r[:30], r[:30])


def test_sort_matrix_and_linear_model():
    g = np.array([0.1, 0.5, -0.3])
    M = linear_model_matrix(g)
    np.testing.assert_allclose(M, [[1, 0.05, -0.03], [0.05, 1, -0.15], [-0.03, -0.15, 1]])
    with pytest.raises(ValueError):
        linear_model_matrix([1.5])
    C = correlation_matrix(np.random.default_rng(0).normal(size=(30, 3)))
    s = sort_matrix_by_cvr(C, g)
    assert s.order.tolist() == [1, 0, 2] and s.matrix.labels == ["1", "0", "2"]
    assert s.matrix.values[0, 1] == C.values[1, 0]
    assert s.band == pytest.approx(2 / np.sqrt(30))


def test_category_counts():
    labels = [CategoryLabel("a", InvestorType.INDIVIDUAL, 0.5, "threshold", Category.TRENDING, -.1, .1),
              CategoryLabel("b", InvestorType.INSTITUTION, -0.5, "threshold", Category.REVERSING, -.1, .1),
              CategoryLabel("c", InvestorType.INDIVIDUAL, 0.0, "threshold", Category.UNCATEGORIZED, -.1, .1)]
    c = category_counts(labels)
    assert c["all"] == {"N": 3, "trending": 1, "reversing": 1, "uncategorized": 1}
    assert c["ind"]["trending"] == 1 and c["ins"]["reversing"] == 1 and c["ins"]["N"] == 1
