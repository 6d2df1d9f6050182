"""Buy and sell herding days per investor group."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .classify import Category
from .marketdata import InvestorType

EXACT_INTEGER_LIMIT = 1024


@dataclass
class HerdingDay:
    stock_code: str
    date: object
    group: tuple
    n_plus: int
    n_minus: int
    h: float | None
    direction: str
    p_value: float | None


def daily_direction(series, date=None) -> str:
    """``buyer``, ``seller`` or ``inactive`` from the sign of the net flow on ``date``."""
    if date is None:
        value = float(series)
    else:
        value = float(series.v[list(series.times).index(date)])
    if value > 0:
        return "buyer"
    if value < 0:
        return "seller"
    return "inactive"


def herding_index(n_plus: int, n_minus: int) -> float:
    if n_plus + n_minus < 1:
        raise ValueError("herding index undefined without buyers or sellers")
    return n_plus / (n_plus + n_minus)


def binomial_tail(k: int, n: int, upper: bool = True) -> float:
    """``P(X >= k)`` (or ``P(X <= k)``) for ``X ~ Binomial(n, 1/2)``.

    Exact integer sums up to n = 1024, the regularized incomplete beta
    function beyond.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if upper:
        if k <= 0:
            return 1.0
        if k > n:
            return 0.0
    else:
        if k >= n:
            return 1.0
        if k < 0:
            return 0.0
    if n <= EXACT_INTEGER_LIMIT:
        ks = range(k, n + 1) if upper else range(0, k + 1)
        return sum(math.comb(n, j) for j in ks) / 2 ** n
    return float(stats.binom.sf(k - 1, n, 0.5) if upper else stats.binom.cdf(k, n, 0.5))


def binomial_herding_test(n_plus: int, n_minus: int, alpha: float = 0.05) -> tuple[str, float]:
    """One-sided exact binomial tests under a fair coin.

    Buy herding if ``P(X >= N+) < alpha``, sell herding if ``P(X <= N+) < alpha``.
    Returns the direction (``buy``/``sell``/``none``) and the smaller tail probability.
    """
    n = n_plus + n_minus
    if n < 1:
        raise ValueError("need at least one active investor")
    p_buy = binomial_tail(n_plus, n, upper=True)
    p_sell = binomial_tail(n_plus, n, upper=False)
    if p_buy < alpha:
        return "buy", p_buy
    if p_sell < alpha:
        return "sell", p_sell
    return "none", min(p_buy, p_sell)


GROUPS = tuple((c, t) for c in (Category.REVERSING, Category.TRENDING, Category.UNCATEGORIZED)
               for t in (InvestorType.INDIVIDUAL, InvestorType.INSTITUTION))


def herding_days(v, types, categories, dates, stock_code: str = "", alpha: float = 0.05) -> list[HerdingDay]:
    """Per day and group, buyer and seller counts with the herding verdict."""
    v = np.asarray(v, dtype=float)
    types = [InvestorType(t) for t in types]
    categories = [Category(c) for c in categories]
    out = []
    for cat, typ in GROUPS:
        cols = [i for i, (c, t) in enumerate(zip(categories, types)) if c == cat and t == typ]
        if not cols:
            continue
        sub = v[:, cols]
        plus = (sub > 0).sum(axis=1)
        minus = (sub < 0).sum(axis=1)
        for d, np_, nm in zip(dates, plus, minus):
            if np_ + nm == 0:
                out.append(HerdingDay(stock_code, d, (cat, typ), 0, 0, None, "none", None))
                continue
            direction, p = binomial_herding_test(int(np_), int(nm), alpha)
            out.append(HerdingDay(stock_code, d, (cat, typ), int(np_), int(nm), herding_index(np_, nm), direction, p))
    return out


def herding_day_counts(v, types, categories, dates, stock_code: str = "", alpha: float = 0.05) -> dict:
    """Buy (``n+``) and sell (``n-``) herding-day counts per category and type.

    ``v`` is the daily ``(T, N)`` panel. Groups without members count zero.
    """
    counts = {(c, t): {"buy": 0, "sell": 0} for c, t in GROUPS}
    for day in herding_days(v, types, categories, dates, stock_code, alpha):
        if day.direction != "none":
            counts[day.group][day.direction] += 1
    return {"stock": stock_code, "trading_days": len(dates), "counts": counts}


def herding_row(result: dict) -> dict:
    """Flatten counts into the report columns, e.g. ``reversing_n+_d`` (d: individuals, s: institutions)."""
    row = {"stock": result["stock"], "trading_days": result["trading_days"]}
    for (cat, typ), c in result["counts"].items():
        suffix = "d" if typ == InvestorType.INDIVIDUAL else "s"
        row[f"{cat.value}_n+_{suffix}"] = c["buy"]
        row[f"{cat.value}_n-_{suffix}"] = c["sell"]
    return row
