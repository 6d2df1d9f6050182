"""Synthetic panels and trade logs with planted structure."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta

import numpy as np

from .calendar import SHENZHEN_SESSIONS, bins_per_day, session_lengths
from .classify import Category
from .errors import AnalysisError
from .marketdata import HEADER, InvestorType, zscore

TICK = 1 / 64  # binary-exact, so price * integer size sums without rounding


def _rng(seed):
    return np.random.default_rng(seed)


def gen_iid_panel(N: int, T: int, seed=None) -> np.ndarray:
    """``(T, N)`` i.i.d. Gaussian panel, each column standardized."""
    if N < 2 or T < 2:
        raise ValueError("N and T must be >= 2")
    X = _rng(seed).standard_normal((T, N))
    return (X - X.mean(axis=0)) / X.std(axis=0)


def _check_loadings(*loadings):
    total = sum(np.asarray(g, dtype=float) ** 2 for g in loadings)
    if np.any(total >= 1):
        raise ValueError("factor loadings must satisfy sum of squares < 1")
    return 1 - total


def gen_factor_panel(gammas, T: int, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """``V_i = gamma_i R + sqrt(1 - gamma_i^2) eps_i`` with standard Gaussian ``R`` and ``eps``."""
    g = np.asarray(gammas, dtype=float)
    resid = _check_loadings(g)
    rng = _rng(seed)
    R = rng.standard_normal(T)
    eps = rng.standard_normal((T, len(g)))
    return R[:, None] * g + np.sqrt(resid) * eps, R


def gen_two_factor_panel(gammas1, gammas2, T: int, seed=None):
    """Two independent factors: ``V_i = g1_i R + g2_i F + noise``. Returns ``(V, R, F)``."""
    g1 = np.asarray(gammas1, dtype=float)
    g2 = np.asarray(gammas2, dtype=float)
    resid = _check_loadings(g1, g2)
    rng = _rng(seed)
    R = rng.standard_normal(T)
    F = rng.standard_normal(T)
    eps = rng.standard_normal((T, len(g1)))
    return R[:, None] * g1 + F[:, None] * g2 + np.sqrt(resid) * eps, R, F


def gen_leadlag_panel(beta: float, lag: int, N: int, T: int, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """``V_i(t) = beta R(t - lag) + sqrt(1 - beta^2) eps_i(t)``; ``R`` includes a burn-in so every row is complete."""
    if lag < 1:
        raise ValueError("lag must be >= 1")
    _check_loadings(beta)
    rng = _rng(seed)
    R_full = rng.standard_normal(T + lag)
    eps = rng.standard_normal((T, N))
    V = beta * R_full[:T, None] + np.sqrt(1 - beta ** 2) * eps
    return V, R_full[lag:]


def gen_herding_panel(N: int, T: int, buy_days=(), sell_days=(), p_active: float = 1.0, seed=None) -> np.ndarray:
    """Daily net flows with fair-coin signs, except that every member buys on ``buy_days`` and sells on ``sell_days``."""
    rng = _rng(seed)
    sign = rng.choice([-1.0, 1.0], size=(T, N))
    active = rng.random((T, N)) < p_active
    v = sign * active * rng.lognormal(10, 1, size=(T, N))
    for d in buy_days:
        v[d] = np.abs(v[d]) + 1
    for d in sell_days:
        v[d] = -np.abs(v[d]) - 1
    return v


@dataclass
class TradeLogPlan:
    """Explicit inputs of :func:`gen_trade_log`.

    ``bin_prices`` is ``(days, bins)`` on the synthetic tick; the last bin's
    price is the day's close. ``target_v`` is ``(days, investors)``; each
    nonzero target must be an integer number of shares at one of the day's
    bin prices.
    """

    stock_code: str
    dates: list[date]
    investor_ids: list[str]
    investor_types: list[InvestorType]
    bin_prices: np.ndarray
    target_v: np.ndarray
    minutes: int = 15
    seed: int = 0
    reservoir_prefix: str = "RSV"
    truth: dict = field(default_factory=dict)


@dataclass
class SynthSpec:
    """Planted scenario for an end-to-end trade log."""

    n_investors: int = 120
    n_days: int = 238
    model: str = "one_factor"
    gammas: list[float] | None = None
    gamma: float = 0.3
    institution_fraction: float = 0.3
    cash_scale: float = 1e5
    start_price: float = 20.0
    daily_vol: float = 0.02
    minutes: int = 15
    stock_code: str = "000001"
    start_date: date = date(2003, 1, 2)
    seed: int = 0

    def __post_init__(self):
        if self.model not in ("one_factor", "iid_noise"):
            raise ValueError(f"trade logs support models one_factor and iid_noise, not {self.model!r}")
        if self.n_investors < 0 or self.n_days < 0:
            raise ValueError("n_investors and n_days must be non-negative")


def trading_dates(start: date, n: int) -> list[date]:
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def _to_tick(p):
    return np.maximum(np.round(np.asarray(p) / TICK), 1) * TICK


def plan_from_spec(spec: SynthSpec) -> TradeLogPlan:
    """Price path and per-investor targets realizing ``spec``.

    Targets are drawn after the prices, so the planted loadings refer to the
    normalized daily returns of the rounded price path itself.
    """
    rng = _rng(spec.seed)
    N, D = spec.n_investors, spec.n_days
    B = bins_per_day(spec.minutes)
    ids = [f"INV{i:04d}" for i in range(N)]
    n_ins = int(round(spec.institution_fraction * N))
    types = [InvestorType.INSTITUTION] * n_ins + [InvestorType.INDIVIDUAL] * (N - n_ins)
    types = list(rng.permutation(np.array(types, dtype=object)))
    if spec.model == "iid_noise":
        gammas = np.zeros(N)
    elif spec.gammas is not None:
        gammas = np.asarray(spec.gammas, dtype=float)
        if len(gammas) != N:
            raise ValueError("gammas must have one entry per investor")
    else:
        gammas = spec.gamma * rng.choice([-1.0, 1.0], size=N)
    _check_loadings(gammas)

    bin_sd = spec.daily_vol / np.sqrt(B)
    logp = np.log(spec.start_price) + np.cumsum(rng.normal(0, bin_sd, size=D * B))
    prices = _to_tick(np.exp(logp)).reshape(D, B)
    if D < 2 or N == 0:
        target = np.zeros((D, N))
        return TradeLogPlan(spec.stock_code, trading_dates(spec.start_date, D), ids, types, prices, target,
                            spec.minutes, spec.seed, truth={"gammas": gammas.tolist()})

    R = zscore(np.diff(np.log(prices[:, -1])))
    eps = rng.standard_normal((D, N))
    V = eps * np.sqrt(1 - gammas ** 2)
    V[1:] += R[:, None] * gammas
    scale = spec.cash_scale * rng.lognormal(0, 0.5, size=N)
    ref_bin = rng.integers(0, B, size=(D, N))
    ref_price = np.take_along_axis(prices, ref_bin, axis=1)
    shares = np.round(V * scale / ref_price)
    target = ref_price * shares
    cats = [Category.TRENDING if g > 0 else Category.REVERSING if g < 0 else Category.UNCATEGORIZED for g in gammas]
    truth = {"gammas": gammas.tolist(), "categories": [c.value for c in cats]}
    return TradeLogPlan(spec.stock_code, trading_dates(spec.start_date, D), ids, types, prices, target,
                        spec.minutes, spec.seed, truth=truth)


def _split(rng, q: int, m: int) -> list[int]:
    """Random composition of ``q`` into ``m`` positive parts."""
    if m == 1:
        return [q]
    cuts = np.sort(rng.choice(np.arange(1, q), size=m - 1, replace=False))
    return list(np.diff(np.concatenate([[0], cuts, [q]])).astype(int))


def _bin_windows(minutes, sessions=SHENZHEN_SESSIONS):
    """Start second-of-day of each bin."""
    starts = []
    for (open_, _), length in zip(sessions, session_lengths(sessions)):
        base = open_.hour * 3600 + open_.minute * 60
        starts.extend(base + b * minutes * 60 for b in range(length // minutes))
    return starts


def gen_trade_log(plan: TradeLogPlan | SynthSpec) -> tuple[bytes, TradeLogPlan]:
    """Emit a trade-log CSV whose daily inventory variations equal ``plan.target_v``.

    Each nonzero target is split into 1-5 same-side trades at one bin price of
    the day. Counterparties come from a pool of reservoir investors, each too
    inactive to pass the activity filter, and one reservoir-to-reservoir trade
    at the end of every bin sets the bin's closing price.
    """
    if isinstance(plan, SynthSpec):
        plan = plan_from_spec(plan)
    rng = _rng([plan.seed, 1])
    D, N = plan.target_v.shape if plan.target_v.size else (len(plan.dates), len(plan.investor_ids))
    B = plan.bin_prices.shape[1] if plan.bin_prices.size else bins_per_day(plan.minutes)
    starts = _bin_windows(plan.minutes)
    width = plan.minutes * 60

    rows = []  # (day, second, order, buyer, seller, price, size)
    for d in range(D):
        day_prices = plan.bin_prices[d]
        for i in range(N):
            v = plan.target_v[d, i]
            if v == 0:
                continue
            b, q = _feasible_bin(v, day_prices, rng)
            if b is None:
                raise AnalysisError(f"target {v} of {plan.investor_ids[i]} on day {d} is not an integer "
                                    "number of shares at any of the day's prices")
            m = int(min(rng.integers(1, 6), abs(q)))
            for part in _split(rng, abs(q), m):
                sec = starts[b] + int(rng.integers(0, width - 2))
                rows.append([d, sec, 0, i if q > 0 else -1, -1 if q > 0 else i, day_prices[b], part])
        for b in range(B):
            rows.append([d, starts[b] + width - 1, 1, -1, -1, day_prices[b], 100])

    reservoir_sides = sum((r[3] == -1) + (r[4] == -1) for r in rows)
    pool = max(8, int(np.ceil(reservoir_sides / 40)))
    pool_types = rng.choice([t.value for t in InvestorType], size=pool)

    def reservoir():
        k = int(rng.integers(0, pool))
        return f"{plan.reservoir_prefix}{k:05d}", pool_types[k]

    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(HEADER)
    for d, sec, _, bi, si, price, size in rows:
        ts = datetime.combine(plan.dates[d], datetime.min.time()) + timedelta(seconds=sec)
        if bi >= 0:
            buyer, btype = plan.investor_ids[bi], plan.investor_types[bi].value
        else:
            buyer, btype = reservoir()
        if si >= 0:
            seller, stype = plan.investor_ids[si], plan.investor_types[si].value
        else:
            seller, stype = reservoir()
            while seller == buyer:
                seller, stype = reservoir()
        w.writerow([plan.stock_code, ts.isoformat(), buyer, btype, seller, stype, repr(float(price)), int(size)])
    return out.getvalue().encode("utf-8"), plan


def _feasible_bin(v, prices, rng):
    for b in rng.permutation(len(prices)):
        q = v / prices[b]
        if q == np.round(q) and prices[b] * np.round(q) == v:
            return int(b), int(np.round(q))
    return None, None
