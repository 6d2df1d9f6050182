"""Densities of coefficient samples and line fits to their transformed axes.

Tails are fitted as ``P(C) ~ exp(-lambda C)`` on (C, ln P) and the bulk as
``P(C) ~ C^-gamma`` on (ln C, ln P). Negative coefficients are reflected
before fitting. The shuffled-data exponential uses Huber IRLS.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConvergenceError, InsufficientDataError

HUBER_K = 1.345


@dataclass
class DensityEstimate:
    bin_edges: np.ndarray
    density: np.ndarray
    counts: np.ndarray
    binning: str
    sample_size: int

    @property
    def bin_widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def bin_centers(self) -> np.ndarray:
        e = self.bin_edges
        if self.binning == "logarithmic":
            return np.sqrt(e[:-1] * e[1:])
        return (e[:-1] + e[1:]) / 2


@dataclass
class FitResult:
    model: str
    estimate: float
    stderr: float
    range: tuple[float, float]
    r2: float
    n: int
    iterations: int | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["range"] = list(self.range)
        return d


def _edges(lo, hi, binning, n_bins):
    if binning == "linear":
        return np.linspace(lo, hi, n_bins + 1)
    if binning == "logarithmic":
        return np.geomspace(lo, hi, n_bins + 1)
    raise ValueError(f"unknown binning {binning!r}")


def estimate_density(sample, binning: str = "linear", n_bins: int | None = None,
                     range: tuple[float, float] | None = None, normalize_to: int | None = None) -> DensityEstimate:
    """Histogram density over ``range`` (default: the sample's support).

    Linear binning defaults to 50 bins; logarithmic binning to 20 bins per
    decade and needs strictly positive values. ``normalize_to`` sets the
    count the density is normalized by (default: points inside the range),
    which lets a windowed histogram keep the normalization of a wider sample.
    """
    x = np.asarray(sample, dtype=float)
    if x.size == 0:
        raise InsufficientDataError("empty sample", count=0)
    if x.size < 100:
        warnings.warn(f"density from only {x.size} points", stacklevel=2)
    lo, hi = range if range is not None else (x.min(), x.max())
    if binning == "logarithmic":
        if lo <= 0:
            raise ValueError("logarithmic binning needs strictly positive values")
        if n_bins is None:
            n_bins = max(1, int(np.ceil(20 * np.log10(hi / lo)))) if hi > lo else 1
    elif n_bins is None:
        n_bins = 50
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
        if binning == "logarithmic":
            lo, hi = x[0] / np.sqrt(10), x[0] * np.sqrt(10)
    edges = _edges(lo, hi, binning, n_bins)
    counts, _ = np.histogram(x, bins=edges)
    total = normalize_to if normalize_to is not None else counts.sum()
    density = counts / (total * np.diff(edges)) if total else np.zeros(n_bins)
    return DensityEstimate(edges, density, counts, binning, int(x.size))


def _signed(sample, sign):
    x = np.asarray(sample, dtype=float)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return x[x > 0] if sign > 0 else -x[x < 0]


def _ols(x, y, w=None):
    """Weighted least squares line; returns (intercept, slope, slope stderr, r2, residuals)."""
    if w is None:
        w = np.ones_like(x)
    X = np.column_stack([np.ones_like(x), x])
    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    resid = y - X @ beta
    dof = max(len(x) - 2, 1)
    s2 = np.sum(w * resid ** 2) / dof
    cov = s2 * np.linalg.inv((X * w[:, None]).T @ X)
    ybar = np.average(y, weights=w)
    ss_tot = np.sum(w * (y - ybar) ** 2)
    r2 = 1 - np.sum(w * resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return beta[0], beta[1], float(np.sqrt(cov[1, 1])), float(r2), resid


def _binned_line(sample, lo, hi, binning, n_bins, min_points, label):
    inside = sample[(sample > lo) & (sample <= hi)]
    if inside.size < min_points:
        raise InsufficientDataError(f"{label}: {inside.size} points in ({lo}, {hi}], need {min_points}",
                                    count=int(inside.size))
    dens = estimate_density(inside, binning, n_bins, range=(lo, hi), normalize_to=sample.size)
    keep = dens.counts > 0
    if keep.sum() < 3:
        raise InsufficientDataError(f"{label}: fewer than 3 occupied bins", count=int(keep.sum()))
    return dens.bin_centers[keep], np.log(dens.density[keep]), int(inside.size)


def fit_exponential_tail(sample, range: tuple[float, float] = (0.1, 0.6), sign: int = 1,
                         n_bins: int = 25, min_points: int = 50) -> FitResult:
    """Decay rate of an exponential tail by least squares on (|C|, ln P)."""
    lo, hi = range
    x = _signed(sample, sign)
    xc, ly, n = _binned_line(x, lo, hi, "linear", n_bins, min_points, "exponential tail")
    _, slope, se, r2, _ = _ols(xc, ly)
    return FitResult("exp_tail_pos" if sign > 0 else "exp_tail_neg", -slope, se, (lo, hi), r2, n)


def fit_power_bulk(sample, range: tuple[float, float] = (1e-5, 0.01), sign: int = 1,
                   n_bins: int | None = None, min_points: int = 50) -> FitResult:
    """Power-law exponent of the bulk by least squares on (ln |C|, ln P) with log bins."""
    lo, hi = range
    x = _signed(sample, sign)
    xc, ly, n = _binned_line(x, lo, hi, "logarithmic", n_bins, min_points, "power bulk")
    _, slope, se, r2, _ = _ols(np.log(xc), ly)
    return FitResult("power_pos" if sign > 0 else "power_neg", -slope, se, (lo, hi), r2, n)


def huber_irls(x, y, k: float = HUBER_K, max_iter: int = 100, tol: float = 1e-6):
    """Huber M-estimate of a line by iteratively reweighted least squares.

    The residual scale is re-estimated each step as MAD/0.6745. Returns
    ``(intercept, slope, slope stderr, r2, weights, iterations)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x)
    beta = None
    for it in range(1, max_iter + 1):
        b0, b1, se, r2, resid = _ols(x, y, w)
        scale = np.median(np.abs(resid - np.median(resid))) / 0.6745
        if not scale > 0:
            return b0, b1, se, r2, w, it
        u = np.abs(resid) / (k * scale)
        w = np.where(u <= 1, 1.0, 1.0 / np.maximum(u, 1e-300))
        if beta is not None and abs(b1 - beta[1]) <= tol * max(1.0, abs(b1)) and abs(b0 - beta[0]) <= tol * max(1.0, abs(b0)):
            return b0, b1, se, r2, w, it
        beta = (b0, b1)
    raise ConvergenceError(f"Huber IRLS did not converge in {max_iter} iterations")


def fit_shuffled_exponential(sample, range: tuple[float, float] | None = None, n_bins: int = 50,
                             min_bin_count: int = 5, window_medians: float = 8.0,
                             min_points: int = 50, max_iter: int = 100) -> FitResult:
    """Rate of ``P(C) = lambda exp(-lambda C)`` for |C| from shuffled data, by Huber regression.

    The default window is ``(0, window_medians * median|C|]``, about five and a
    half decay lengths for an exponential, which keeps sparse far-tail bins and
    gross outliers out of the regression. Bins with fewer than
    ``min_bin_count`` points are not fitted.
    """
    x = np.abs(np.asarray(sample, dtype=float))
    x = x[x > 0]
    if x.size < min_points:
        raise InsufficientDataError(f"shuffled exponential: {x.size} points, need {min_points}", count=int(x.size))
    lo, hi = range if range is not None else (0.0, float(window_medians * np.median(x)))
    inside = x[(x > lo) & (x <= hi)]
    if inside.size < min_points:
        raise InsufficientDataError(f"shuffled exponential: {inside.size} points in ({lo}, {hi}]",
                                    count=int(inside.size))
    dens = estimate_density(inside, "linear", n_bins, range=(lo, hi), normalize_to=x.size)
    keep = dens.counts >= min_bin_count
    if keep.sum() < 3:
        raise InsufficientDataError("shuffled exponential: fewer than 3 usable bins", count=int(keep.sum()))
    _, slope, se, r2, _, iters = huber_irls(dens.bin_centers[keep], np.log(dens.density[keep]), max_iter=max_iter)
    return FitResult("exp_shuffled", -slope, se, (lo, hi), r2, int(inside.size), iters)


def interval_counts(sample, n_intervals: int = 10) -> dict:
    """Counts of positive and negative coefficients per equal-width |C| interval of (0, 1].

    Exact zeros are counted separately. ``log_positive``/``log_negative``
    hold ``log10(1 + N)``.
    """
    x = np.asarray(sample, dtype=float)
    edges = np.linspace(0.0, 1.0, n_intervals + 1)
    a = np.abs(x)
    idx = np.clip(np.ceil(a * n_intervals).astype(int) - 1, 0, n_intervals - 1)
    pos = np.bincount(idx[x > 0], minlength=n_intervals)
    neg = np.bincount(idx[x < 0], minlength=n_intervals)
    return {
        "lower": edges[:-1],
        "upper": edges[1:],
        "positive": pos,
        "negative": neg,
        "log_positive": np.log10(1 + pos),
        "log_negative": np.log10(1 + neg),
        "zeros": int(np.sum(x == 0)),
    }
