"""Trending / reversing / uncategorized investors from the inventory-return correlation."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import AlignmentError, DegenerateSeriesError, InsufficientDataError
from .marketdata import InvestorType
from .xcorr import CorrelationMatrix

BOOTSTRAP_QUANTILES = (0.02275, 0.97725)


class Category(str, Enum):
    TRENDING = "trending"
    REVERSING = "reversing"
    UNCATEGORIZED = "uncategorized"

    def __str__(self):
        return self.value


@dataclass
class CategoryLabel:
    investor_id: str | None
    investor_type: InvestorType | None
    c_vr: float
    method: str
    label: Category
    lower: float
    upper: float

    @property
    def gamma(self) -> float:
        return self.c_vr


def _values(x, attr):
    return np.asarray(getattr(x, attr, x), dtype=float)


def corr_with_return(series, R) -> float:
    """Pearson coefficient between an inventory series and the return series."""
    if hasattr(series, "times") and hasattr(R, "dates") and list(series.times) != list(R.dates):
        raise AlignmentError("inventory and return series are not aligned")
    v = _values(series, "v")
    r = _values(R, "raw_return")
    if v.shape != r.shape:
        raise AlignmentError(f"lengths differ: {v.shape[0]} vs {r.shape[0]}")
    if not (v.std() > 0 and r.std() > 0):
        raise DegenerateSeriesError("zero-variance series")
    return float(np.clip(np.corrcoef(v, r)[0, 1], -1.0, 1.0))


def _label(c, lower, upper):
    if c > upper:
        return Category.TRENDING
    if c < lower:
        return Category.REVERSING
    return Category.UNCATEGORIZED


def threshold_categorize(c_vr: float, n_t: int, investor_id=None, investor_type=None) -> CategoryLabel:
    """Label by the ``+/- 2/sqrt(N_T)`` band; a value on the boundary is uncategorized."""
    if n_t < 4:
        raise ValueError(f"N_T must be >= 4, got {n_t}")
    band = 2.0 / np.sqrt(n_t)
    return CategoryLabel(investor_id, investor_type, float(c_vr), "threshold", _label(c_vr, -band, band), -band, band)


def circular_block_indices(rng, T: int, block_len: int, n_rep: int) -> np.ndarray:
    """``(n_rep, T)`` index arrays of a circular moving-block bootstrap."""
    n_blocks = -(-T // block_len)
    starts = rng.integers(0, T, size=(n_rep, n_blocks))
    idx = (starts[:, :, None] + np.arange(block_len)) % T
    return idx.reshape(n_rep, -1)[:, :T]


def _row_corr(A, B):
    A = A - A.mean(axis=1, keepdims=True)
    B = B - B.mean(axis=1, keepdims=True)
    den = np.sqrt((A * A).sum(axis=1) * (B * B).sum(axis=1))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, (A * B).sum(axis=1) / den, 0.0)


def bootstrap_null(v, r, n_rep: int = 1000, block_len: int = 20, seed=None) -> np.ndarray:
    """Correlations between independently block-bootstrapped copies of ``v`` and ``r``."""
    rng = np.random.default_rng(seed)
    T = len(v)
    iv = circular_block_indices(rng, T, block_len, n_rep)
    ir = circular_block_indices(rng, T, block_len, n_rep)
    return _row_corr(np.asarray(v)[iv], np.asarray(r)[ir])


def bootstrap_categorize(series, R, n_rep: int = 1000, block_len: int = 20,
                         quantiles: tuple[float, float] = BOOTSTRAP_QUANTILES, seed=None,
                         investor_id=None, investor_type=None) -> CategoryLabel:
    """Label by comparing ``C_VR`` with quantiles of a block-bootstrap null.

    ``V`` and ``R`` are resampled independently with a circular moving-block
    bootstrap, which keeps each series' autocorrelation and destroys their
    cross-correlation.
    """
    v = _values(series, "v")
    r = _values(R, "raw_return")
    if len(v) < 2 * block_len:
        raise InsufficientDataError(f"series of length {len(v)} shorter than two blocks of {block_len}",
                                    count=len(v))
    c = corr_with_return(series, R)
    null = bootstrap_null(v, r, n_rep, block_len, seed)
    lower, upper = np.quantile(null, quantiles)
    investor_id = investor_id if investor_id is not None else getattr(series, "investor_id", None)
    investor_type = investor_type if investor_type is not None else getattr(series, "investor_type", None)
    return CategoryLabel(investor_id, investor_type, c, "bootstrap", _label(c, lower, upper),
                         float(lower), float(upper))


@dataclass
class SortedMatrix:
    matrix: CorrelationMatrix
    order: np.ndarray
    c_vr: np.ndarray
    band: float


def sort_matrix_by_cvr(C: CorrelationMatrix, c_vr) -> SortedMatrix:
    """Rows and columns reordered by descending ``C_VR`` (stable for ties)."""
    c_vr = np.asarray([getattr(x, "c_vr", x) for x in c_vr], dtype=float)
    if len(c_vr) != C.N:
        raise ValueError(f"{len(c_vr)} C_VR values for a {C.N}x{C.N} matrix")
    order = np.argsort(-c_vr, kind="stable")
    return SortedMatrix(C.permuted(order), order, c_vr[order], 2.0 / np.sqrt(C.T))


def linear_model_matrix(gammas) -> np.ndarray:
    """Correlations implied by ``V_i = gamma_i R + eps_i``: ``gamma_i gamma_j`` off the diagonal, 1 on it."""
    g = np.asarray(gammas, dtype=float)
    if np.any(np.abs(g) > 1):
        raise ValueError("|gamma_i| must not exceed 1")
    M = np.outer(g, g)
    np.fill_diagonal(M, 1.0)
    return M


def category_counts(labels) -> dict:
    """Number of trending/reversing/uncategorized investors overall and per type."""
    out = {}
    for key, want in (("all", None), ("ind", InvestorType.INDIVIDUAL), ("ins", InvestorType.INSTITUTION)):
        sel = [l for l in labels if want is None or l.investor_type == want]
        out[key] = {"N": len(sel), **{c.value: sum(l.label == c for l in sel) for c in Category}}
    return out
