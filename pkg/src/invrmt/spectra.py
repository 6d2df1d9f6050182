"""Eigenvalue spectra of correlation matrices against random-matrix nulls."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import stats

from .calendar import DAILY, SHENZHEN_SESSIONS, assign_periods, bins_per_day
from .errors import AnalysisError, InsufficientDataError
from .inventory import InventoryPanel, flow_matrix
from .marketdata import trades_frame
from .xcorr import CorrelationMatrix, correlation_from_standardized

logger = logging.getLogger(__name__)

NULL_QUANTILE = 0.97725


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    Q: float | None = None
    mp_bounds: tuple[float, float] | None = None
    null_threshold: float | None = None
    labels: list[str] | None = None

    @property
    def N(self) -> int:
        return len(self.eigenvalues)

    def to_dict(self) -> dict:
        d = {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "Q": self.Q,
            "mp_bounds": list(self.mp_bounds) if self.mp_bounds else None,
            "null_threshold": self.null_threshold,
        }
        if self.mp_bounds is not None and self.null_threshold is not None:
            d["deviating_ranks"] = [r for r, _ in deviating_eigenvalues(self)]
        return d


def eigendecompose(C: CorrelationMatrix | np.ndarray, T: int | None = None) -> SpectralResult:
    """Full symmetric eigendecomposition, eigenvalues descending.

    Each eigenvector is oriented so its largest-magnitude component is
    positive. With the number of time records known (from ``C`` or ``T``),
    ``Q = T/N`` and the Marchenko-Pastur bounds are filled in.
    """
    labels = None
    if isinstance(C, CorrelationMatrix):
        labels, T, M = list(C.labels), C.T if T is None else T, C.values
    else:
        M = np.asarray(C, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 2:
        raise ValueError(f"need a square matrix with N >= 2, got shape {M.shape}")
    asym = np.max(np.abs(M - M.T))
    if asym > 1e-10:
        raise AnalysisError(f"matrix not symmetric (max |C - Cᵀ| = {asym:.3g})")
    w, U = np.linalg.eigh(M)
    order = np.argsort(w)[::-1]
    w, U = w[order], U[:, order]
    pivot = np.abs(U).argmax(axis=0)
    U = U * np.sign(U[pivot, np.arange(U.shape[1])])
    Q = bounds = None
    if T is not None:
        Q = T / M.shape[0]
        if Q >= 1:
            bounds = mp_bounds(Q)
    return SpectralResult(w, U, Q, bounds, None, labels)


def mp_bounds(Q: float, sigma2: float = 1.0) -> tuple[float, float]:
    """Edges of the Marchenko-Pastur support, ``sigma2 (1 + 1/Q -/+ 2 sqrt(1/Q))``."""
    if not Q >= 1:
        raise ValueError(f"Q = T/N must be >= 1, got {Q}")
    r = 1.0 / Q
    return sigma2 * (1 + r - 2 * np.sqrt(r)), sigma2 * (1 + r + 2 * np.sqrt(r))


def mp_density(lam, Q: float, sigma2: float = 1.0):
    """Marchenko-Pastur eigenvalue density; zero outside the support."""
    lo, hi = mp_bounds(Q, sigma2)
    lam = np.asarray(lam, dtype=float)
    inside = (lam >= lo) & (lam <= hi) & (lam > 0)
    safe = np.where(inside, lam, 1.0)
    f = Q / (2 * np.pi * sigma2) * np.sqrt(np.clip((hi - safe) * (safe - lo), 0, None)) / safe
    out = np.where(inside, f, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class NullResult:
    """Largest eigenvalue and spectrum per shuffle replica."""

    mode: str
    largest: np.ndarray
    spectra: list[np.ndarray]
    coefficients: np.ndarray | None
    quantile: float = NULL_QUANTILE
    threshold: float = field(init=False)

    def __post_init__(self):
        self.threshold = float(np.quantile(self.largest, self.quantile))

    def pooled_spectrum(self) -> np.ndarray:
        return np.concatenate(self.spectra)


def replica_seed(master: int, k: int) -> int:
    return int(master) ^ int(k)


def _standardize_columns(X):
    sd = X.std(axis=0)
    ok = sd > 0
    if not ok.all():
        X, sd = X[:, ok], sd[ok]
    return (X - X.mean(axis=0)) / sd


class _TradeShuffler:
    def __init__(self, trades, investor_ids, horizon, calendar, sessions):
        df = trades_frame(trades)
        if df["stock"].nunique() > 1:
            raise ValueError("trade_shuffle needs the trades of a single stock")
        if calendar is None:
            raise ValueError("trade_shuffle needs the calendar of the analyzed panel")
        self.period = assign_periods(df["timestamp"].to_numpy(), calendar, horizon, sessions)
        col = {inv: j for j, inv in enumerate(investor_ids)}
        self.buyer = df["buyer_id"].map(col).fillna(-1).to_numpy(dtype=np.int64)
        self.seller = df["seller_id"].map(col).fillna(-1).to_numpy(dtype=np.int64)
        self.value = df["price"].to_numpy(dtype=float) * df["size"].to_numpy(dtype=float)
        self.n_periods = len(calendar) * bins_per_day(horizon, sessions)
        self.n = len(investor_ids)

    def __call__(self, rng, drop_first: int = 0):
        buyer = rng.permutation(self.buyer)
        seller = rng.permutation(self.seller)
        v = flow_matrix(self.period, buyer, seller, self.value, self.n_periods, self.n)
        return v[drop_first:]


def shuffle_null(source, mode: str = "series_permute", n_rep: int = 1000, seed: int = 0,
                 quantile: float = NULL_QUANTILE, jobs: int = 1, keep_coefficients: bool = True,
                 investor_ids: Sequence[str] | None = None, horizon=DAILY, calendar=None,
                 drop_first: int = 0, sessions=SHENZHEN_SESSIONS) -> NullResult:
    """Spectra of surrogate correlation matrices.

    ``series_permute`` permutes every column of a ``(T, N)`` panel
    independently. ``trade_shuffle`` permutes the buyer column and,
    independently, the seller column of a trade log, which keeps each
    investor's number of purchases and sales, then rebuilds the panel of
    ``investor_ids`` on ``calendar`` (dropping ``drop_first`` periods, as the
    analyzed panel does). Replica ``k`` draws from a generator seeded with
    ``seed ^ k``, so results do not depend on ``jobs``.
    """
    if n_rep < 100:
        raise ValueError(f"n_rep must be >= 100, got {n_rep}")
    if mode == "series_permute":
        if isinstance(source, InventoryPanel):
            X = source.v
        elif isinstance(source, np.ndarray):
            X = source
        else:
            raise AnalysisError("series_permute needs a panel")
        X = np.asarray(X, dtype=float)

        def draw(rng):
            return rng.permuted(X, axis=0)
    elif mode == "trade_shuffle":
        if isinstance(source, (InventoryPanel, np.ndarray)):
            raise AnalysisError("trade_shuffle needs trade-level data")
        if investor_ids is None:
            raise ValueError("trade_shuffle needs investor_ids")
        shuffler = _TradeShuffler(source, list(investor_ids), horizon, calendar, sessions)

        def draw(rng):
            return shuffler(rng, drop_first)
    else:
        raise ValueError(f"unknown shuffle mode {mode!r}")

    def replica(k):
        rng = np.random.default_rng(replica_seed(seed, k))
        C = correlation_from_standardized(_standardize_columns(draw(rng)))
        w = np.linalg.eigvalsh(C)[::-1]
        coef = C[np.triu_indices(C.shape[0], k=1)] if keep_coefficients else None
        return w, coef

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(replica, range(n_rep)))
    else:
        results = [replica(k) for k in range(n_rep)]
    spectra = [w for w, _ in results]
    coefs = np.concatenate([c for _, c in results]) if keep_coefficients else None
    return NullResult(mode, np.array([w[0] for w in spectra]), spectra, coefs, quantile)


def with_null(spec: SpectralResult, null: NullResult | float) -> SpectralResult:
    threshold = null.threshold if isinstance(null, NullResult) else float(null)
    return replace(spec, null_threshold=threshold)


def deviating_eigenvalues(spec: SpectralResult) -> list[tuple[int, float]]:
    """(rank, eigenvalue) pairs strictly above both the MP edge and the shuffle threshold; ranks start at 1."""
    if spec.mp_bounds is None or spec.null_threshold is None:
        raise ValueError("spectrum needs both the MP bounds and the shuffle threshold")
    cut = max(spec.mp_bounds[1], spec.null_threshold)
    return [(r + 1, float(x)) for r, x in enumerate(spec.eigenvalues) if x > cut]


def _standardize_vector(u):
    sd = u.std()
    if not sd > 0:
        raise InsufficientDataError("constant eigenvector")
    return (u - u.mean()) / sd


def eigenvector_component_sample(specs: SpectralResult | Sequence[SpectralResult], selector: str = "bulk") -> np.ndarray:
    """Pooled eigenvector components, each eigenvector rescaled to zero mean and unit variance.

    ``bulk`` takes eigenvectors with eigenvalues strictly inside the MP
    bounds; ``rank1``/``rank2`` take ``u(lambda_1)``/``u(lambda_2)``.
    """
    if isinstance(specs, SpectralResult):
        specs = [specs]
    parts = []
    for s in specs:
        if selector == "bulk":
            if s.mp_bounds is None:
                raise ValueError("bulk selection needs MP bounds")
            lo, hi = s.mp_bounds
            cols = np.flatnonzero((s.eigenvalues > lo) & (s.eigenvalues < hi))
        elif selector in ("rank1", "rank2"):
            cols = [int(selector[-1]) - 1]
        else:
            raise ValueError(f"unknown selector {selector!r}")
        parts.extend(_standardize_vector(s.eigenvectors[:, c]) for c in cols)
    if not parts:
        raise InsufficientDataError(f"no eigenvectors selected by {selector!r}", count=0)
    return np.concatenate(parts)


@dataclass
class KSResult:
    statistic: float
    p_value: float
    passed: bool
    n: int


def ks_statistic(sample, cdf=stats.norm.cdf) -> float:
    """Two-sided Kolmogorov-Smirnov distance between the sample's ECDF and ``cdf``.

    The reference CDF is evaluated at each order statistic and just below it,
    so step-function references are handled exactly.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    i = np.arange(1, n + 1)
    at = np.asarray(cdf(x), dtype=float)
    below = np.asarray(cdf(np.nextafter(x, -np.inf)), dtype=float)
    # ECDF just below x_(i) counts earlier distinct values only
    first = np.searchsorted(x, x, side="left")
    upper = np.searchsorted(x, x, side="right")
    d_plus = np.max(np.abs(upper / n - at))
    d_minus = np.max(np.abs(first / n - below))
    return float(max(d_plus, d_minus)) if n else 0.0


def gaussian_component_test(sample, alpha: float = 0.05) -> KSResult:
    """KS test of a standardized component sample against the standard normal (asymptotic p-value)."""
    x = np.asarray(sample, dtype=float)
    if x.size < 20:
        raise InsufficientDataError(f"KS test needs >= 20 points, got {x.size}", count=int(x.size))
    d = ks_statistic(x)
    p = float(stats.kstwobign.sf(np.sqrt(x.size) * d))
    return KSResult(d, p, p >= alpha, int(x.size))


def spectral_density(eigenvalues, bins: int = 50, range=None):
    """Histogram density of eigenvalues: ``(centers, density)``."""
    counts, edges = np.histogram(eigenvalues, bins=bins, range=range)
    dens = counts / (counts.sum() * np.diff(edges))
    return (edges[:-1] + edges[1:]) / 2, dens
