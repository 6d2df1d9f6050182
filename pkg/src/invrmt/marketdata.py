"""Trade-log ingestion, active-investor selection and return series."""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime
from enum import Enum
from typing import BinaryIO, Iterable, Sequence

import numpy as np
import pandas as pd

from .calendar import DAILY, SHENZHEN_SESSIONS, assign_periods, build_calendar, bins_per_day, period_labels
from .errors import DegenerateSeriesError, InsufficientDataError, ParseError

logger = logging.getLogger(__name__)

HEADER = ["stock", "timestamp", "buyer_id", "buyer_type", "seller_id", "seller_type", "price", "size"]


class InvestorType(str, Enum):
    INDIVIDUAL = "ind"
    INSTITUTION = "ins"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class TradeRecord:
    stock_code: str
    timestamp: datetime
    buyer_id: str
    buyer_type: InvestorType
    seller_id: str
    seller_type: InvestorType
    price: float
    size: float

    def __post_init__(self):
        if not self.price > 0:
            raise ValueError(f"price must be positive, got {self.price}")
        if not self.size > 0:
            raise ValueError(f"size must be positive, got {self.size}")
        if self.buyer_id == self.seller_id:
            raise ValueError(f"buyer and seller are both {self.buyer_id!r}")


@dataclass(frozen=True)
class InvestorProfile:
    investor_id: str
    investor_type: InvestorType
    transaction_count: int


@dataclass
class ParseReport:
    rows: int = 0
    accepted: int = 0
    rejected: int = 0
    out_of_order: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)

    @property
    def reordered(self) -> bool:
        return self.out_of_order > 0

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "out_of_order": self.out_of_order,
            "reordered": self.reordered,
            "errors": [{"line": line, "reason": reason} for line, reason in self.errors],
        }


@dataclass
class ReturnSeries:
    """Log-returns between consecutive periods; ``normalized`` is ``R(t)``."""

    stock_code: str
    dates: list
    raw_return: np.ndarray
    normalized_return: np.ndarray | None
    flagged: list = field(default_factory=list)

    @property
    def degenerate(self) -> bool:
        return self.normalized_return is None

    def __len__(self):
        return len(self.raw_return)


def _parse_number(text: str) -> float:
    value = float(text)
    if not np.isfinite(value):
        raise ValueError(f"non-finite number {text!r}")
    return value


def _parse_row(row: list[str]) -> TradeRecord:
    if len(row) != len(HEADER):
        raise ValueError(f"expected {len(HEADER)} fields, got {len(row)}")
    stock, ts, buyer, btype, seller, stype, price, size = (x.strip() for x in row)
    if not stock:
        raise ValueError("empty stock code")
    if not buyer or not seller:
        raise ValueError("empty investor id")
    try:
        timestamp = datetime.fromisoformat(ts)
    except ValueError:
        raise ValueError(f"bad timestamp {ts!r}") from None
    try:
        buyer_type, seller_type = InvestorType(btype), InvestorType(stype)
    except ValueError:
        raise ValueError(f"investor type must be 'ind' or 'ins', got {btype!r}/{stype!r}") from None
    return TradeRecord(stock, timestamp, buyer, buyer_type, seller, seller_type,
                       _parse_number(price), _parse_number(size))


def parse_trades(source: bytes | BinaryIO, strict: bool = False) -> tuple[list[TradeRecord], ParseReport]:
    """Parse a UTF-8 trade-log CSV.

    Malformed rows are skipped and counted in the report; with ``strict=True``
    the first one raises :class:`ParseError`. Records come back sorted by
    ``(stock_code, timestamp)`` (stable with respect to file order); rows that
    arrived out of timestamp order within their stock are counted.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    text = io.TextIOWrapper(source, encoding="utf-8", newline="")
    reader = csv.reader(text)
    report = ParseReport()
    records: list[TradeRecord] = []

    header = next(reader, None)
    if header is None:
        return records, report
    if [h.strip() for h in header] != HEADER:
        raise ParseError(1, f"unexpected header {header!r}")

    known_types: dict[str, InvestorType] = {}
    last_ts: dict[str, datetime] = {}
    for line, row in enumerate(reader, start=2):
        if not row or all(not x.strip() for x in row):
            continue
        report.rows += 1
        try:
            rec = _parse_row(row)
            for inv, typ in ((rec.buyer_id, rec.buyer_type), (rec.seller_id, rec.seller_type)):
                seen = known_types.get(inv)
                if seen is not None and seen != typ:
                    raise ValueError(f"investor {inv!r} changes type {seen} -> {typ}")
        except ValueError as exc:
            if strict:
                raise ParseError(line, str(exc)) from None
            report.rejected += 1
            report.errors.append((line, str(exc)))
            continue
        known_types.setdefault(rec.buyer_id, rec.buyer_type)
        known_types.setdefault(rec.seller_id, rec.seller_type)
        prev = last_ts.get(rec.stock_code)
        if prev is not None and rec.timestamp < prev:
            report.out_of_order += 1
        else:
            last_ts[rec.stock_code] = rec.timestamp
        records.append(rec)
        report.accepted += 1

    if report.out_of_order:
        logger.warning("%d trades out of timestamp order; reordered", report.out_of_order)
    records.sort(key=lambda r: (r.stock_code, r.timestamp))
    return records, report


def read_trades(path, strict: bool = False) -> tuple[list[TradeRecord], ParseReport]:
    with open(path, "rb") as fh:
        return parse_trades(fh, strict=strict)


def trades_frame(trades: Sequence[TradeRecord] | pd.DataFrame) -> pd.DataFrame:
    """Columnar view of a trade collection (columns named as in the CSV header)."""
    if isinstance(trades, pd.DataFrame):
        return trades
    if not trades:
        return pd.DataFrame({c: pd.Series(dtype=object) for c in HEADER}).astype(
            {"price": float, "size": float, "timestamp": "datetime64[s]"})
    return pd.DataFrame({
        "stock": [t.stock_code for t in trades],
        "timestamp": np.array([t.timestamp for t in trades], dtype="datetime64[s]"),
        "buyer_id": [t.buyer_id for t in trades],
        "buyer_type": [t.buyer_type.value for t in trades],
        "seller_id": [t.seller_id for t in trades],
        "seller_type": [t.seller_type.value for t in trades],
        "price": np.array([t.price for t in trades], dtype=float),
        "size": np.array([t.size for t in trades], dtype=float),
    })


def investor_profiles(trades) -> dict[str, list[InvestorProfile]]:
    """Every investor per stock with its number of transactions (either side)."""
    df = trades_frame(trades)
    out: dict[str, list[InvestorProfile]] = {}
    for stock, grp in df.groupby("stock", sort=True):
        counts = Counter(grp["buyer_id"]) + Counter(grp["seller_id"])
        types = dict(zip(grp["seller_id"], grp["seller_type"]))
        types.update(zip(grp["buyer_id"], grp["buyer_type"]))
        out[stock] = [InvestorProfile(inv, InvestorType(types[inv]), n) for inv, n in counts.items()]
    return out


def filter_active(trades, min_investor_trades: int = 120, min_investors_per_stock: int = 120,
                  top_k: int = 80, stock_selection_trades: int | None = None) -> dict[str, list[InvestorProfile]]:
    """Keep, per stock, the ``top_k`` most active investors.

    Investors need at least ``min_investor_trades`` transactions. A stock with
    fewer than ``min_investors_per_stock`` investors reaching
    ``stock_selection_trades`` (default: ``min_investor_trades``) is dropped.
    Ties in the count are broken by investor id.
    """
    if stock_selection_trades is None:
        stock_selection_trades = min_investor_trades
    for name, value in (("min_investor_trades", min_investor_trades),
                        ("min_investors_per_stock", min_investors_per_stock), ("top_k", top_k),
                        ("stock_selection_trades", stock_selection_trades)):
        if value <= 0:
            raise ValueError(f"{name} must be positive, got {value}")
    result = {}
    for stock, profiles in investor_profiles(trades).items():
        active = sum(p.transaction_count >= stock_selection_trades for p in profiles)
        if active < min_investors_per_stock:
            logger.info("stock %s excluded: %d active investors", stock, active)
            continue
        qualifying = [p for p in profiles if p.transaction_count >= min_investor_trades]
        qualifying.sort(key=lambda p: (-p.transaction_count, p.investor_id))
        result[stock] = qualifying[:top_k]
    return result


def restrict_trades(trades, investor_ids: Iterable[str]) -> pd.DataFrame:
    """Trades in which at least one of ``investor_ids`` is a counterparty."""
    df = trades_frame(trades)
    ids = set(investor_ids)
    return df[df["buyer_id"].isin(ids) | df["seller_id"].isin(ids)].reset_index(drop=True)


def zscore(x) -> np.ndarray:
    """Population (1/T) standardization; raises on zero variance."""
    x = np.asarray(x, dtype=float)
    sd = x.std()
    if not sd > 0:
        raise DegenerateSeriesError("series has zero variance")
    return (x - x.mean()) / sd


PRICE_REFERENCES = ("close", "vwap")


def _closes(df: pd.DataFrame, calendar, horizon, sessions, price_ref="close"):
    period = assign_periods(df["timestamp"].to_numpy(), calendar, horizon, sessions)
    keep = period >= 0
    n_periods = len(calendar) * bins_per_day(horizon, sessions)
    if price_ref == "vwap":
        size = df["size"].to_numpy()[keep]
        volume = np.bincount(period[keep], weights=size, minlength=n_periods)
        value = np.bincount(period[keep], weights=size * df["price"].to_numpy()[keep], minlength=n_periods)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(volume > 0, value / volume, np.nan)
    if price_ref != "close":
        raise ValueError(f"price_ref must be one of {PRICE_REFERENCES}, got {price_ref!r}")
    order = np.lexsort((np.arange(len(df))[keep], df["timestamp"].to_numpy()[keep]))
    p = period[keep][order]
    prices = df["price"].to_numpy()[keep][order]
    close = np.full(n_periods, np.nan)
    _, idx = np.unique(p[::-1], return_index=True)
    last = len(p) - 1 - idx
    close[p[last]] = prices[last]
    return close


def period_returns(trades, horizon=DAILY, calendar: list[date] | None = None,
                   sessions=SHENZHEN_SESSIONS, price_ref: str = "close") -> ReturnSeries:
    """Close-to-close log-returns on a period grid.

    ``price_ref="vwap"`` uses each period's volume-weighted price instead of
    its last trade. A period without trades carries the previous close forward and is
    flagged. The first period only provides the reference close, so the
    series has one value fewer than the grid.
    """
    df = trades_frame(trades)
    stocks = df["stock"].unique()
    if len(stocks) > 1:
        raise ValueError(f"expected trades of a single stock, got {len(stocks)}")
    if calendar is None:
        calendar = build_calendar(df["timestamp"].to_numpy())
    close = _closes(df, calendar, horizon, sessions, price_ref)
    labels = period_labels(calendar, horizon, sessions)
    if len(close) < 2 or np.isnan(close).all():
        raise InsufficientDataError("need at least two periods with trades", count=int(np.sum(~np.isnan(close))))
    first = int(np.argmax(~np.isnan(close)))
    if first > 0:
        raise InsufficientDataError(f"no trade in the first period {labels[0]}")
    flagged = [labels[i] for i in np.flatnonzero(np.isnan(close))]
    close = pd.Series(close).ffill().to_numpy()
    raw = np.log(close[1:] / close[:-1])
    try:
        norm = zscore(raw)
    except DegenerateSeriesError:
        norm = None
    return ReturnSeries(str(stocks[0]) if len(stocks) else "", labels[1:], raw, norm, flagged)


def daily_returns(trades, calendar: list[date] | None = None, price_ref: str = "close") -> ReturnSeries:
    """Daily close-to-close log-returns, ``R(t)`` being their standardized form."""
    return period_returns(trades, DAILY, calendar, price_ref=price_ref)
