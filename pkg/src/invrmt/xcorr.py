"""Equal-time correlation matrices of inventory variations."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import AlignmentError, DegenerateSeriesError, InsufficientDataError
from .inventory import InventoryPanel, InventorySeries
from .marketdata import InvestorType

logger = logging.getLogger(__name__)

GROUPS = ("ind-ind", "ind-ins", "ins-ins")


@dataclass
class CorrelationMatrix:
    labels: list[str]
    types: list[InvestorType]
    values: np.ndarray
    T: int

    @property
    def N(self) -> int:
        return len(self.labels)

    def upper(self) -> np.ndarray:
        return self.values[np.triu_indices(self.N, k=1)]

    def permuted(self, order) -> "CorrelationMatrix":
        order = np.asarray(order)
        return CorrelationMatrix([self.labels[i] for i in order], [self.types[i] for i in order],
                                 self.values[np.ix_(order, order)], self.T)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=self.labels, columns=self.labels)

    def write_csv(self, path):
        self.to_frame().to_csv(path, index_label="investor", float_format="%.17g", lineterminator="\n")


def correlation_from_standardized(V: np.ndarray) -> np.ndarray:
    """``(1/T) VᵀV`` for a standardized ``(T, N)`` array, made exactly symmetric with unit diagonal."""
    T = V.shape[0]
    C = V.T @ V / T
    C = (C + C.T) / 2
    np.fill_diagonal(C, 1.0)
    return np.clip(C, -1.0, 1.0)


def corr_columns(X) -> np.ndarray:
    """Pearson correlation between the columns of a ``(T, N)`` array."""
    X = np.asarray(X, dtype=float)
    sd = X.std(axis=0)
    if not np.all(sd > 0):
        raise DegenerateSeriesError(f"{int(np.sum(~(sd > 0)))} degenerate columns")
    return correlation_from_standardized((X - X.mean(axis=0)) / sd)


def _as_panel(panel) -> InventoryPanel:
    if isinstance(panel, InventoryPanel):
        return panel
    if isinstance(panel, np.ndarray):
        T, N = panel.shape
        return InventoryPanel("", None, list(range(T)), [str(i) for i in range(N)],
                              [InvestorType.INDIVIDUAL] * N, panel)
    return InventoryPanel.from_series(list(panel))


def correlation_matrix(panel: InventoryPanel | Sequence[InventorySeries] | np.ndarray) -> CorrelationMatrix:
    """Pairwise Pearson coefficients ``C_ij`` over the common time index."""
    panel = _as_panel(panel)
    if panel.N < 2:
        raise InsufficientDataError("need at least two series", count=panel.N)
    if panel.T < 3:
        raise InsufficientDataError("need at least three time records", count=panel.T)
    return CorrelationMatrix(list(panel.investor_ids), list(panel.investor_types),
                             correlation_from_standardized(panel.standardized()), panel.T)


def pair_group(a: InvestorType, b: InvestorType) -> str:
    return "-".join(sorted((InvestorType(a).value, InvestorType(b).value)))


@dataclass
class PooledSample:
    samples: dict[str, np.ndarray]
    means: dict[str, float] = field(init=False)

    def __post_init__(self):
        self.means = {k: float(v.mean()) if len(v) else float("nan") for k, v in self.samples.items()}

    def __getitem__(self, key):
        return self.samples[key]


def pooled_coefficients(matrices: Sequence[CorrelationMatrix]) -> PooledSample:
    """Upper-triangle coefficients of all matrices, split by investor-type pair."""
    parts = {k: [] for k in ("all",) + GROUPS}
    for C in matrices:
        iu, ju = np.triu_indices(C.N, k=1)
        vals = C.values[iu, ju]
        parts["all"].append(vals)
        types = np.array([InvestorType(t).value for t in C.types])
        groups = np.array([pair_group(a, b) for a, b in zip(types[iu], types[ju])])
        for g in GROUPS:
            parts[g].append(vals[groups == g])
    return PooledSample({k: np.concatenate(v) if v else np.empty(0) for k, v in parts.items()})


def rolling_mean_correlation(panel, window: int = 5) -> tuple[list, np.ndarray]:
    """Mean off-diagonal coefficient of correlation matrices recomputed in each window.

    Returns the window end labels and the means. Series that are constant
    within a window are left out of that window's matrix.
    """
    panel = _as_panel(panel)
    if window < 3:
        raise ValueError(f"window must be >= 3, got {window}")
    if panel.T < window:
        raise InsufficientDataError(f"series shorter than window {window}", count=panel.T)
    ends, means = [], []
    for end in range(window, panel.T + 1):
        X = panel.v[end - window:end]
        ok = X.std(axis=0) > 0
        if np.sum(ok) < panel.N:
            logger.debug("window ending %s: %d degenerate series dropped", panel.times[end - 1], panel.N - ok.sum())
        ends.append(panel.times[end - 1])
        if np.sum(ok) < 2:
            means.append(np.nan)
            continue
        C = corr_columns(X[:, ok])
        means.append(C[np.triu_indices(C.shape[0], k=1)].mean())
    return ends, np.asarray(means)


def check_alignment(a_times, b_times):
    if list(a_times) != list(b_times):
        raise AlignmentError("time indices differ")
