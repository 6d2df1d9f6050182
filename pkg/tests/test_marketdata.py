from collections import Counter
from datetime import datetime, timedelta

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st

from invrmt.errors import InsufficientDataError, ParseError
from invrmt.marketdata import (InvestorType, TradeRecord, daily_returns, filter_active, investor_profiles,
                               parse_trades, restrict_trades, trades_frame, zscore)


def _row(ts="2003-01-02T10:00:00", buyer="A", btype="ind", seller="B", stype="ins", price="10.5", size="200",
         stock="000001"):
    return [stock, ts, buyer, btype, seller, stype, price, size]


def _frame(counts: dict, stock="S1", start=datetime(2003, 1, 2, 9, 30)) -> pd.DataFrame:
    """Trades giving each investor in ``counts`` that many transactions, each against a fresh counterparty."""
    rows = []
    k = 0
    for inv, n in counts.items():
        for _ in range(n):
            rows.append({"stock": stock, "timestamp": start + timedelta(seconds=k), "buyer_id": inv,
                         "buyer_type": "ind", "seller_id": f"cp{k}", "seller_type": "ins",
                         "price": 10.0, "size": 100.0})
            k += 1
    df = pd.DataFrame(rows)
    df["timestamp"] = df["timestamp"].astype("datetime64[s]")
    return df


class TestParse:
    def test_single_row(self, make_log):
        recs, rep = parse_trades(make_log([_row()]))
        assert len(recs) == 1
        r = recs[0]
        assert (r.price, r.size, r.buyer_id, r.seller_type) == (10.5, 200.0, "A", InvestorType.INSTITUTION)
        assert r.timestamp == datetime(2003, 1, 2, 10)
        assert rep.accepted == 1 and rep.rejected == 0

    def test_empty_stream(self, make_log):
        recs, rep = parse_trades(b"")
        assert recs == [] and rep.rows == 0
        recs, rep = parse_trades(make_log([]))
        assert recs == [] and rep.rows == 0

    @pytest.mark.parametrize("bad", [
        _row(size="0"), _row(price="-1"), _row(seller="A"), _row(btype="xx"), _row(ts="yesterday"),
        _row(price="nan"), _row()[:-1],
    ])
    def test_malformed_rows_are_counted(self, make_log, bad):
        recs, rep = parse_trades(make_log([_row(), bad]))
        assert len(recs) == 1
        assert rep.rows == 2 and rep.rejected == 1 and rep.errors[0][0] == 3

    def test_strict_mode_aborts(self, make_log):
        with pytest.raises(ParseError) as err:
            parse_trades(make_log([_row(), _row(size="0")]), strict=True)
        assert err.value.line == 3

    def test_bad_header(self, make_log):
        with pytest.raises(ParseError):
            parse_trades(make_log([_row()], header=["a", "b"]))

    def test_reordering_is_flagged(self, make_log):
        rows = [_row(ts="2003-01-02T10:00:02"), _row(ts="2003-01-02T10:00:01"), _row(ts="2003-01-02T10:00:03")]
        recs, rep = parse_trades(make_log(rows))
        assert [r.timestamp.second for r in recs] == [1, 2, 3]
        assert rep.out_of_order == 1 and rep.reordered

    def test_type_conflict_rejected(self, make_log):
        recs, rep = parse_trades(make_log([_row(), _row(buyer="A", btype="ins", seller="C")]))
        assert len(recs) == 1 and rep.rejected == 1

    def test_sorted_by_stock_then_time(self, make_log):
        rows = [_row(stock="2", ts="2003-01-02T10:00:00"), _row(stock="1", ts="2003-01-02T11:00:00"),
                _row(stock="1", ts="2003-01-02T09:00:00")]
        recs, _ = parse_trades(make_log(rows))
        assert [(r.stock_code, r.timestamp.hour) for r in recs] == [("1", 9), ("1", 11), ("2", 10)]

    def test_record_invariants(self):
        with pytest.raises(ValueError):
            TradeRecord("1", datetime(2003, 1, 2), "A", InvestorType.INDIVIDUAL, "A", InvestorType.INDIVIDUAL, 1, 1)


class TestFilter:
    def test_direct_threshold(self):
        kept = filter_active(_frame({"x": 150, "y": 130, "z": 100}), 120, 1, 80)
        assert [p.investor_id for p in kept["S1"]] == ["x", "y"]

    def test_stock_excluded_below_min_investors(self):
        counts = {f"i{j:03d}": 120 for j in range(119)}
        assert filter_active(_frame(counts), 120, 120, 80) == {}
        counts["i119"] = 121
        assert "S1" in filter_active(_frame(counts), 120, 120, 80)

    def test_top_k_matches_sort_oracle(self):
        rng = np.random.default_rng(3)
        counts = {f"i{j:03d}": int(c) for j, c in enumerate(rng.integers(120, 160, size=100))}
        kept = filter_active(_frame(counts), 120, 100, 80)["S1"]
        oracle = sorted(counts, key=lambda k: (-counts[k], k))[:80]
        assert [p.investor_id for p in kept] == oracle
        assert len(kept) == 80

    def test_stock_selection_threshold(self):
        counts = {f"i{j}": 130 for j in range(5)}
        assert filter_active(_frame(counts), 120, 5, 80, stock_selection_trades=150) == {}
        assert len(filter_active(_frame(counts), 120, 5, 80)["S1"]) == 5

    def test_ties_broken_by_id(self):
        kept = filter_active(_frame({"b": 130, "a": 130, "c": 130}), 120, 1, 2)["S1"]
        assert [p.investor_id for p in kept] == ["a", "b"]

    def test_positive_thresholds(self):
        with pytest.raises(ValueError):
            filter_active(_frame({"a": 1}), 0, 1, 1)

    @given(st.lists(st.integers(0, 40), min_size=1, max_size=25), st.integers(1, 30), st.integers(1, 12))
    def test_idempotent(self, counts, min_trades, top_k):
        if not any(counts):
            return
        df = _frame({f"i{j:02d}": c for j, c in enumerate(counts)})
        first = filter_active(df, min_trades, 1, top_k)
        if not first:
            return
        ids = [p.investor_id for p in first["S1"]]
        second = filter_active(restrict_trades(df, ids), min_trades, 1, top_k)
        assert [p.investor_id for p in second["S1"]] == ids

    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=60))
    def test_count_sum_is_twice_trades(self, pairs):
        pairs = [(b, s) for b, s in pairs if b != s]
        if not pairs:
            return
        df = pd.DataFrame({"stock": "S", "timestamp": np.datetime64("2003-01-02T10:00:00", "s"),
                           "buyer_id": [f"i{b}" for b, _ in pairs], "buyer_type": "ind",
                           "seller_id": [f"i{s}" for _, s in pairs], "seller_type": "ind",
                           "price": 1.0, "size": 1.0})
        profiles = investor_profiles(df)["S"]
        assert sum(p.transaction_count for p in profiles) == 2 * len(pairs)
        ref = Counter(b for b, _ in pairs) + Counter(s for _, s in pairs)
        assert {p.investor_id: p.transaction_count for p in profiles} == {f"i{k}": v for k, v in ref.items()}


def _day_trades(closes, scale=1.0):
    rows = []
    for d, c in enumerate(closes):
        day = datetime(2003, 1, 2) + timedelta(days=d)
        rows.append({"stock": "S", "timestamp": day.replace(hour=10), "buyer_id": "a", "buyer_type": "ind",
                     "seller_id": "b", "seller_type": "ind", "price": 5.0 * scale, "size": 1.0})
        if c is not None:
            rows.append({"stock": "S", "timestamp": day.replace(hour=14), "buyer_id": "a", "buyer_type": "ind",
                         "seller_id": "b", "seller_type": "ind", "price": c * scale, "size": 1.0})
    df = pd.DataFrame(rows)
    df["timestamp"] = df["timestamp"].astype("datetime64[s]")
    return df


class TestReturns:
    def test_flat(self):
        assert daily_returns(_day_trades([10, 10])).raw_return.tolist() == [0.0]

    def test_ln_e(self):
        r = daily_returns(_day_trades([10, 10 * np.e])).raw_return
        assert r[0] == pytest.approx(1.0, abs=1e-14)

    def test_normalized_moments(self):
        closes = 10 * np.exp(np.cumsum(np.random.default_rng(0).normal(0, 0.02, 50)))
        r = daily_returns(_day_trades(closes))
        assert len(r) == 49
        np.testing.assert_allclose(r.raw_return, np.diff(np.log(closes)), rtol=1e-12)
        assert abs(r.normalized_return.mean()) < 1e-12
        assert abs(r.normalized_return.var() - 1) < 1e-12

    def test_missing_day_carried_forward(self):
        df = _day_trades([10, 11, 12])
        day2 = df["timestamp"].dt.day == 3
        calendar = sorted({t.date() for t in df["timestamp"]})
        r = daily_returns(df[~day2], calendar)
        assert r.flagged == ["2003-01-03"]
        np.testing.assert_allclose(r.raw_return, [0.0, np.log(1.2)])

    def test_needs_first_close(self):
        df = _day_trades([10, 11, 12])
        calendar = sorted({t.date() for t in df["timestamp"]})
        with pytest.raises(InsufficientDataError):
            daily_returns(df[df["timestamp"].dt.day != 2], calendar)

    def test_vwap_reference(self):
        r = daily_returns(_day_trades([15, 15]), price_ref="vwap")
        assert r.raw_return[0] == pytest.approx(0.0)
        r = daily_returns(_day_trades([15, 25]), price_ref="vwap")
        assert r.raw_return[0] == pytest.approx(np.log(15 / 10))

    @given(st.lists(st.floats(1, 100), min_size=3, max_size=20), st.floats(0.01, 100))
    def test_scale_invariance(self, closes, scale):
        a = daily_returns(_day_trades(closes)).raw_return
        b = daily_returns(_day_trades(closes, scale)).raw_return
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_zscore_population_convention():
    np.testing.assert_allclose(zscore([1, 2, 3]), [-np.sqrt(1.5), 0, np.sqrt(1.5)])


def test_trades_frame_roundtrip(make_log):
    recs, _ = parse_trades(make_log([_row(), _row(ts="2003-01-02T10:00:05", buyer="C")]))
    df = trades_frame(recs)
    assert list(df["buyer_id"]) == ["A", "C"]
    assert df["timestamp"].dtype == "datetime64[s]"
