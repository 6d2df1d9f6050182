"""Autocorrelation, lagged cross-correlation and Granger indicators of intraday series."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import AlignmentError, DegenerateSeriesError, InsufficientDataError
from .inventory import resample_sum

logger = logging.getLogger(__name__)


@dataclass
class LaggedCorrelation:
    lags: np.ndarray
    values: np.ndarray
    band: np.ndarray
    group: tuple | str | None = None
    members: int = 1


def _arr(x, attr):
    return np.asarray(getattr(x, attr, x), dtype=float)


def autocorrelation(series, max_lag: int) -> LaggedCorrelation:
    """Biased autocorrelation (denominator T) for lags 0..max_lag, band +/- 2/sqrt(T)."""
    x = _arr(series, "v")
    T = len(x)
    if T <= 2 * max_lag:
        raise InsufficientDataError(f"length {T} must exceed 2*max_lag = {2 * max_lag}", count=T)
    d = x - x.mean()
    c0 = d @ d
    if not c0 > 0:
        raise DegenerateSeriesError("constant series")
    lags = np.arange(max_lag + 1)
    vals = np.array([d[: T - k] @ d[k:] for k in lags]) / c0
    return LaggedCorrelation(lags, vals, np.full(len(lags), 2 / np.sqrt(T)))


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt((a @ a) * (b @ b))
    return float(a @ b / den) if den > 0 else 0.0


def lagged_crosscorrelation(V, R, max_lag: int) -> LaggedCorrelation:
    """``C(tau) = corr(V(t), R(t + tau))`` over the overlapping observations.

    Negative ``tau`` means the return leads the inventory variation. The band
    at each lag is ``+/- 2/sqrt(T - |tau|)``.
    """
    if hasattr(V, "times") and hasattr(R, "dates") and list(V.times) != list(R.dates):
        raise AlignmentError("inventory and return series are not aligned")
    v = _arr(V, "v")
    r = _arr(R, "raw_return")
    if v.shape != r.shape:
        raise AlignmentError(f"lengths differ: {v.shape[0]} vs {r.shape[0]}")
    T = len(v)
    if T <= 2 * max_lag:
        raise InsufficientDataError(f"length {T} must exceed 2*max_lag = {2 * max_lag}", count=T)
    lags = np.arange(-max_lag, max_lag + 1)
    vals = np.array([_pearson(v[max(0, -k): T - max(0, k)], r[max(0, k): T - max(0, -k)]) for k in lags])
    return LaggedCorrelation(lags, vals, 2 / np.sqrt(T - np.abs(lags)))


def group_average_correlation(correlations, groups) -> dict:
    """Pointwise mean of lagged correlations per group key; empty groups are absent."""
    buckets = defaultdict(list)
    for corr, g in zip(correlations, groups):
        buckets[g].append(corr)
    out = {}
    for g, items in buckets.items():
        lags = items[0].lags
        if any(not np.array_equal(c.lags, lags) for c in items):
            raise AlignmentError(f"group {g!r} mixes lag grids")
        out[g] = LaggedCorrelation(lags, np.mean([c.values for c in items], axis=0),
                                   np.mean([c.band for c in items], axis=0), g, len(items))
    return out


@dataclass
class GrangerResult:
    direction: str
    delta_T: int
    lag_order: int
    F: float
    p_value: float
    indicator: int
    n_obs: int
    investor_id: str | None = None
    c_vr: float | None = None
    n_t: int | None = None
    meta: dict = field(default_factory=dict)


def _lag_design(x, y, p, start):
    """Rows t = start..T-1: own lags of y (restricted) plus lags of x (unrestricted)."""
    T = len(y)
    own = np.column_stack([y[start - j: T - j] for j in range(1, p + 1)])
    other = np.column_stack([x[start - j: T - j] for j in range(1, p + 1)])
    ones = np.ones((T - start, 1))
    return y[start:], np.hstack([ones, own]), np.hstack([ones, own, other])


def _rss(X, y):
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ beta
    return float(r @ r)


def granger_f_test(x, y, p: int, start: int | None = None) -> tuple[float, float, int]:
    """F-test that ``p`` lags of ``x`` add nothing to an AR(p) of ``y``; returns (F, p-value, n)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    start = p if start is None else start
    yy, Xr, Xu = _lag_design(x, y, p, start)
    n = len(yy)
    df2 = n - Xu.shape[1]
    if df2 <= 0:
        raise InsufficientDataError("too few observations for the lag order", count=n)
    rss_r, rss_u = _rss(Xr, yy), _rss(Xu, yy)
    if rss_u <= 0:
        F = np.inf if rss_r > 0 else 0.0
    else:
        F = ((rss_r - rss_u) / p) / (rss_u / df2)
    return float(F), float(stats.f.sf(F, p, df2)), n


LAG_SELECTIONS = ("restricted", "unrestricted")


def select_lag_order(x, y, max_order: int, selection: str = "restricted") -> int:
    """Lag order minimizing the AIC over 1..``max_order`` on a common sample.

    ``restricted`` scores the autoregression of ``y`` on its own lags.
    ``unrestricted`` scores the regression that also holds the lags of ``x``;
    picking the order on the very terms under test inflates the size of
    the F-test (about 10% instead of 5% for independent white noise).
    """
    if selection not in LAG_SELECTIONS:
        raise ValueError(f"selection must be one of {LAG_SELECTIONS}, got {selection!r}")
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    best, best_aic = 1, np.inf
    for p in range(1, max_order + 1):
        yy, Xr, Xu = _lag_design(x, y, p, max_order)
        X = Xr if selection == "restricted" else Xu
        n = len(yy)
        rss = _rss(X, yy)
        aic = n * np.log(max(rss, 1e-300) / n) + 2 * X.shape[1]
        if aic < best_aic - 1e-12:
            best, best_aic = p, aic
    return best


def granger_indicator(X, Y, delta_T: int = 1, max_lag_order: int = 4, alpha: float = 0.05,
                      direction: str | None = None, selection: str = "restricted", **meta) -> GrangerResult:
    """Indicator that ``X`` Granger-causes ``Y`` at horizon ``delta_T`` base periods.

    Both series are summed over windows of ``delta_T`` periods. The lag order
    is picked by AIC over 1..``max_lag_order`` (see :func:`select_lag_order`),
    and the F-test uses the common sample that starts after
    ``max_lag_order`` observations.
    """
    x = resample_sum(_arr(X, "v"), delta_T)
    y = resample_sum(_arr(Y, "v"), delta_T)
    if len(x) != len(y):
        raise AlignmentError("series differ in length")
    need = 20 + 2 * max_lag_order
    if len(x) < need:
        raise InsufficientDataError(f"{len(x)} observations at delta_T={delta_T}, need {need}", count=len(x))
    p = select_lag_order(x, y, max_lag_order, selection)
    F, pval, n = granger_f_test(x, y, p, start=max_lag_order)
    return GrangerResult(direction or "X->Y", int(delta_T), p, F, pval, int(pval < alpha), n,
                         meta.pop("investor_id", None), meta.pop("c_vr", None), meta.pop("n_t", None), meta)


def granger_pair(V, R, delta_T: int = 1, max_lag_order: int = 4, alpha: float = 0.05,
                 selection: str = "restricted", **meta):
    """Both directions for an inventory/return pair: ``(V->R, R->V)``."""
    v, r = _arr(V, "v"), _arr(R, "raw_return")
    return (granger_indicator(v, r, delta_T, max_lag_order, alpha, "V->R", selection, **dict(meta)),
            granger_indicator(r, v, delta_T, max_lag_order, alpha, "R->V", selection, **dict(meta)))


def cvr_bin(c_vr: float, n_t: int) -> int:
    """Index of the width-``1/sqrt(N_T)`` bin containing ``c_vr`` (bin 0 is [0, sigma))."""
    return int(np.floor(c_vr * np.sqrt(n_t)))


def aggregate_indicators(results, group_by: str = "horizon") -> list[dict]:
    """Fraction of ``I = 1`` per direction and horizon, or per direction and ``C_VR`` bin.

    In ``cvr_bin`` mode a bin lying inside +/- 2 sigma is marked uncategorized.
    """
    buckets = defaultdict(list)
    for res in results:
        if group_by == "horizon":
            key = (res.direction, res.delta_T)
        elif group_by == "cvr_bin":
            if res.c_vr is None or res.n_t is None:
                raise ValueError("cvr_bin grouping needs c_vr and n_t on every result")
            key = (res.direction, res.delta_T, cvr_bin(res.c_vr, res.n_t), res.n_t)
        else:
            raise ValueError(f"unknown grouping {group_by!r}")
        buckets[key].append(res.indicator)
    rows = []
    for key in sorted(buckets):
        ind = buckets[key]
        row = {"direction": key[0], "delta_T": key[1], "n": len(ind), "E_I": float(np.mean(ind))}
        if group_by == "cvr_bin":
            b, n_t = key[2], key[3]
            sigma = 1 / np.sqrt(n_t)
            row.update(bin=b, lower=b * sigma, upper=(b + 1) * sigma, uncategorized=(-2 <= b and b + 1 <= 2))
        rows.append(row)
    return rows
