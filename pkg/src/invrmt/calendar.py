"""Trading calendar and intraday bin grid.

Periods are indexed by ``day * bins_per_day + bin``. Intraday bins are anchored
at each session open, so a bin never spans the midday break or the overnight
gap. Trades before the first open (call auction) fall into the first bin of the
day, trades during the break into the last bin of the morning session, and
trades at or after the close into the last bin of the day.
"""

from __future__ import annotations

from datetime import date, time

import numpy as np

DAILY = "daily"

#: Shenzhen continuous-auction sessions.
SHENZHEN_SESSIONS = ((time(9, 30), time(11, 30)), (time(13, 0), time(15, 0)))


def _seconds(t: time) -> int:
    return t.hour * 3600 + t.minute * 60 + t.second


def parse_horizon(value) -> str | int:
    """Normalize ``"daily"``, ``"15min"``, ``"15"`` or ``15`` to ``"daily"`` or minutes."""
    if value is None or value == DAILY:
        return DAILY
    if isinstance(value, str):
        text = value.strip().lower()
        if text == DAILY:
            return DAILY
        for suffix in ("min", "m"):
            if text.endswith(suffix):
                text = text[: -len(suffix)]
                break
        value = int(text)
    minutes = int(value)
    if minutes <= 0:
        raise ValueError(f"horizon must be positive, got {value!r}")
    return minutes


def session_lengths(sessions=SHENZHEN_SESSIONS) -> list[int]:
    return [(_seconds(close) - _seconds(open_)) // 60 for open_, close in sessions]


def bins_per_day(horizon, sessions=SHENZHEN_SESSIONS) -> int:
    horizon = parse_horizon(horizon)
    if horizon == DAILY:
        return 1
    total = 0
    for length in session_lengths(sessions):
        if length % horizon:
            raise ValueError(
                f"intraday horizon {horizon} min does not divide a {length} min session"
            )
        total += length // horizon
    return total


def to_datetime64(timestamps) -> np.ndarray:
    return np.asarray(timestamps, dtype="datetime64[s]")


def build_calendar(timestamps) -> list[date]:
    """Sorted distinct trading dates present in ``timestamps``."""
    days = np.unique(to_datetime64(timestamps).astype("datetime64[D]"))
    return [d.item() for d in days]


def assign_periods(timestamps, calendar, horizon, sessions=SHENZHEN_SESSIONS) -> np.ndarray:
    """Map each timestamp to its period index on ``calendar``; -1 if its date is off-calendar."""
    horizon = parse_horizon(horizon)
    ts = to_datetime64(timestamps)
    days = ts.astype("datetime64[D]")
    cal = np.asarray(calendar, dtype="datetime64[D]")
    pos = np.searchsorted(cal, days)
    pos_clipped = np.minimum(pos, max(len(cal) - 1, 0))
    on_calendar = (pos < len(cal)) & (cal[pos_clipped] == days) if len(cal) else np.zeros(len(ts), bool)
    if horizon == DAILY:
        return np.where(on_calendar, pos_clipped, -1).astype(np.int64)

    nb = bins_per_day(horizon, sessions)
    sod = (ts - days).astype(np.int64)
    opens = np.array([_seconds(o) for o, _ in sessions])
    per_session = [n // horizon for n in session_lengths(sessions)]
    offsets = np.concatenate([[0], np.cumsum(per_session)[:-1]])
    # session k owns [open_k, open_{k+1}); the first session also owns the pre-open
    k = np.searchsorted(opens, sod, side="right") - 1
    k = np.clip(k, 0, len(sessions) - 1)
    within = (sod - opens[k]) // (horizon * 60)
    within = np.clip(within, 0, np.asarray(per_session)[k] - 1)
    period = pos_clipped * nb + offsets[k] + within
    return np.where(on_calendar, period, -1).astype(np.int64)


def period_labels(calendar, horizon, sessions=SHENZHEN_SESSIONS) -> list[str]:
    horizon = parse_horizon(horizon)
    if horizon == DAILY:
        return [d.isoformat() for d in calendar]
    starts = []
    for (open_, _), length in zip(sessions, session_lengths(sessions)):
        base = _seconds(open_)
        for b in range(length // horizon):
            s = base + b * horizon * 60
            starts.append(f"{s // 3600:02d}:{s % 3600 // 60:02d}")
    return [f"{d.isoformat()}T{s}" for d in calendar for s in starts]
