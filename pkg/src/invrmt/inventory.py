"""Signed inventory-variation series ``v_i(t)`` and their standardized form ``V_i(t)``."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import pandas as pd

from .calendar import DAILY, SHENZHEN_SESSIONS, assign_periods, build_calendar, bins_per_day, parse_horizon, period_labels
from .errors import AlignmentError, DegenerateSeriesError, InsufficientDataError
from .marketdata import InvestorType, trades_frame

logger = logging.getLogger(__name__)

DEFAULT_INTRADAY_MINUTES = 15


@dataclass
class InventorySeries:
    investor_id: str
    investor_type: InvestorType
    stock_code: str
    horizon: str | int
    times: list
    v: np.ndarray
    V: np.ndarray | None = None
    sigma: float = field(init=False)

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        if len(self.times) != len(self.v):
            raise ValueError("times and v differ in length")
        self.sigma = float(self.v.std()) if len(self.v) else 0.0

    @property
    def degenerate(self) -> bool:
        return not self.sigma > 0


@dataclass
class InventoryPanel:
    """Inventory variations of several investors of one stock on a common grid.

    ``v`` has shape ``(T, N)``: rows are periods, columns investors.
    """

    stock_code: str
    horizon: str | int
    times: list
    investor_ids: list[str]
    investor_types: list[InvestorType]
    v: np.ndarray

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float).reshape(len(self.times), len(self.investor_ids))
        self.investor_types = [InvestorType(t) for t in self.investor_types]

    @property
    def T(self) -> int:
        return self.v.shape[0]

    @property
    def N(self) -> int:
        return self.v.shape[1]

    @property
    def sigma(self) -> np.ndarray:
        return self.v.std(axis=0)

    @property
    def degenerate(self) -> np.ndarray:
        return ~(self.sigma > 0)

    def standardized(self) -> np.ndarray:
        """``V`` as a ``(T, N)`` array; raises if any column is degenerate."""
        sd = self.sigma
        if not np.all(sd > 0):
            bad = [self.investor_ids[i] for i in np.flatnonzero(~(sd > 0))]
            raise DegenerateSeriesError(f"degenerate series: {bad}")
        return (self.v - self.v.mean(axis=0)) / sd

    def select(self, columns) -> "InventoryPanel":
        idx = np.asarray(columns)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return replace(self, investor_ids=[self.investor_ids[i] for i in idx],
                       investor_types=[self.investor_types[i] for i in idx], v=self.v[:, idx])

    def drop_degenerate(self) -> tuple["InventoryPanel", list[str]]:
        bad = self.degenerate
        dropped = [self.investor_ids[i] for i in np.flatnonzero(bad)]
        if dropped:
            logger.info("%s: %d degenerate series excluded", self.stock_code, len(dropped))
        return self.select(~bad), dropped

    def slice_times(self, start: int, stop: int | None = None) -> "InventoryPanel":
        return replace(self, times=self.times[start:stop], v=self.v[start:stop])

    def series(self, i: int) -> InventorySeries:
        s = InventorySeries(self.investor_ids[i], self.investor_types[i], self.stock_code,
                            self.horizon, list(self.times), self.v[:, i].copy())
        return s if s.degenerate else standardize(s)

    def to_series(self) -> list[InventorySeries]:
        return [self.series(i) for i in range(self.N)]

    @classmethod
    def from_series(cls, series: Sequence[InventorySeries]) -> "InventoryPanel":
        if not series:
            raise ValueError("empty panel")
        times = list(series[0].times)
        for s in series[1:]:
            if list(s.times) != times:
                raise AlignmentError(f"series {s.investor_id} has a different time index")
        return cls(series[0].stock_code, series[0].horizon, times, [s.investor_id for s in series],
                   [s.investor_type for s in series], np.column_stack([s.v for s in series]))

    def write(self, csv_path, json_path):
        frame = pd.DataFrame(self.v, columns=self.investor_ids)
        frame.insert(0, "period", self.times)
        frame.to_csv(csv_path, index=False, float_format="%.17g", lineterminator="\n")
        sigma = self.sigma
        meta = {
            "stock": self.stock_code,
            "horizon": self.horizon,
            "periods": self.T,
            "investors": [
                {"id": inv, "type": typ.value, "sigma": float(sd), "degenerate": not sd > 0}
                for inv, typ, sd in zip(self.investor_ids, self.investor_types, sigma)
            ],
            "degenerate_count": int(np.sum(~(sigma > 0))),
        }
        with open(json_path, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read(cls, csv_path, json_path) -> "InventoryPanel":
        frame = pd.read_csv(csv_path, dtype={"period": str}, float_precision="round_trip")
        with open(json_path) as fh:
            meta = json.load(fh)
        ids = [inv["id"] for inv in meta["investors"]]
        return cls(meta["stock"], meta["horizon"], list(frame["period"]), ids,
                   [inv["type"] for inv in meta["investors"]], frame[ids].to_numpy(dtype=float))


def _single_stock(df: pd.DataFrame, stock: str | None) -> tuple[pd.DataFrame, str]:
    if stock is not None:
        df = df[df["stock"] == stock]
        return df, stock
    stocks = df["stock"].unique()
    if len(stocks) != 1:
        raise ValueError(f"trades span {len(stocks)} stocks; pass stock=")
    return df, str(stocks[0])


def build_panel(trades, investor_ids: Sequence[str], horizon=DAILY, calendar=None, stock: str | None = None,
                sessions=SHENZHEN_SESSIONS, investor_types=None) -> InventoryPanel:
    """Cash-flow panel ``v`` for the given investors.

    ``v[t, i]`` is the value bought minus the value sold by investor ``i`` in
    period ``t``; periods without trades give 0. ``calendar`` defaults to the
    dates on which the stock traded.
    """
    df, stock = _single_stock(trades_frame(trades), stock)
    horizon = parse_horizon(horizon)
    if calendar is None:
        calendar = build_calendar(df["timestamp"].to_numpy())
    ids = list(investor_ids)
    col = {inv: j for j, inv in enumerate(ids)}
    if len(col) != len(ids):
        raise ValueError("duplicate investor ids")
    n_periods = len(calendar) * bins_per_day(horizon, sessions)
    period = assign_periods(df["timestamp"].to_numpy(), calendar, horizon, sessions)
    value = df["price"].to_numpy(dtype=float) * df["size"].to_numpy(dtype=float)
    v = flow_matrix(period, df["buyer_id"].map(col).to_numpy(), df["seller_id"].map(col).to_numpy(),
                    value, n_periods, len(ids))

    if investor_types is None:
        types = dict(zip(df["seller_id"], df["seller_type"]))
        types.update(zip(df["buyer_id"], df["buyer_type"]))
        missing = [inv for inv in ids if inv not in types]
        if missing:
            raise InsufficientDataError(f"investors never trade {stock}: {missing[:5]}")
        investor_types = [types[inv] for inv in ids]
    return InventoryPanel(stock, horizon, period_labels(calendar, horizon, sessions), ids,
                          list(investor_types), v)


def flow_matrix(period, buyer_col, seller_col, value, n_periods: int, n_investors: int) -> np.ndarray:
    """Accumulate signed trade values into a ``(n_periods, n_investors)`` array.

    ``buyer_col``/``seller_col`` hold column indices, NaN or negative for
    investors outside the panel; ``period`` < 0 marks off-calendar trades.
    """
    size = n_periods * n_investors
    out = np.zeros(size)
    for cols, sign in ((buyer_col, 1.0), (seller_col, -1.0)):
        cols = np.asarray(cols, dtype=float)
        ok = (period >= 0) & np.isfinite(cols) & (cols >= 0)
        flat = period[ok] * n_investors + cols[ok].astype(np.int64)
        out += sign * np.bincount(flat, weights=value[ok], minlength=size)
    return out.reshape(n_periods, n_investors)


def build_inventory(trades, investor_id: str, horizon=DAILY, calendar=None, stock: str | None = None,
                    sessions=SHENZHEN_SESSIONS) -> InventorySeries:
    """Inventory variation of one investor; ``V`` is left unset (see :func:`standardize`)."""
    panel = build_panel(trades, [investor_id], horizon, calendar, stock, sessions)
    s = InventorySeries(investor_id, panel.investor_types[0], panel.stock_code, panel.horizon,
                        panel.times, panel.v[:, 0])
    if s.degenerate:
        logger.info("investor %s on %s is degenerate", investor_id, panel.stock_code)
    return s


def standardize(series: InventorySeries) -> InventorySeries:
    """Fill ``V = (v - <v>) / sigma`` with the population standard deviation."""
    if series.degenerate:
        raise DegenerateSeriesError(f"investor {series.investor_id} has zero variance")
    V = (series.v - series.v.mean()) / series.sigma
    return replace(series, V=V)


def resample_sum(x, factor: int) -> np.ndarray:
    """Sum ``factor`` consecutive values along axis 0, dropping a trailing partial window."""
    x = np.asarray(x, dtype=float)
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    n = x.shape[0] // factor
    if n == 0:
        raise InsufficientDataError(f"factor {factor} exceeds series length {x.shape[0]}", count=x.shape[0])
    return x[: n * factor].reshape(n, factor, *x.shape[1:]).sum(axis=1)


def _coarser(horizon, factor):
    return horizon if factor == 1 else (f"{factor}x{horizon}" if horizon == DAILY else horizon * factor)


def resample(series: InventorySeries, factor: int) -> InventorySeries:
    """Aggregate to a horizon ``factor`` times coarser; windows are labelled by their first period."""
    v = resample_sum(series.v, factor)
    out = InventorySeries(series.investor_id, series.investor_type, series.stock_code,
                          _coarser(series.horizon, factor), list(series.times[: len(v) * factor: factor]), v)
    return out if out.degenerate else standardize(out)


def resample_panel(panel: InventoryPanel, factor: int) -> InventoryPanel:
    v = resample_sum(panel.v, factor)
    return replace(panel, horizon=_coarser(panel.horizon, factor),
                   times=list(panel.times[: len(v) * factor: factor]), v=v)
