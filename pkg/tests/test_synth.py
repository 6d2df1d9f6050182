import numpy as np
import pytest

from invrmt.inventory import build_panel
from invrmt.marketdata import daily_returns, filter_active, parse_trades, trades_frame
from invrmt.synth import (TICK, SynthSpec, gen_factor_panel, gen_herding_panel, gen_iid_panel, gen_leadlag_panel,
                          gen_trade_log, gen_two_factor_panel, plan_from_spec, trading_dates)


def test_iid_panel_standardized():
    X = gen_iid_panel(5, 100, seed=1)
    np.testing.assert_allclose(X.mean(0), 0, atol=1e-12)
    np.testing.assert_allclose(X.std(0), 1, atol=1e-12)
    np.testing.assert_array_equal(X, gen_iid_panel(5, 100, seed=1))
    with pytest.raises(ValueError):
        gen_iid_panel(1, 10)


def test_factor_panel_moments():
    V, R = gen_factor_panel([0.5, 0.5, -0.5], 100_000, seed=2)
    C = np.corrcoef(np.column_stack([V, R]).T)
    assert C[0, 1] == pytest.approx(0.25, abs=0.01) and C[0, 2] == pytest.approx(-0.25, abs=0.01)
    assert C[0, 3] == pytest.approx(0.5, abs=0.01)
    with pytest.raises(ValueError):
        gen_factor_panel([1.0], 10)
    V, R, F = gen_two_factor_panel([0.6, 0.6], [0.5, -0.5], 50_000, seed=3)
    assert np.corrcoef(V.T)[0, 1] == pytest.approx(0.36 - 0.25, abs=0.02)


def test_leadlag_panel_alignment():
    V, R = gen_leadlag_panel(0.8, 1, 2, 20_000, seed=4)
    assert np.corrcoef(V[1:, 0], R[:-1])[0, 1] == pytest.approx(0.8, abs=0.02)
    assert abs(np.corrcoef(V[:, 0], R)[0, 1]) < 0.03


def test_herding_panel_planted_days():
    v = gen_herding_panel(10, 30, buy_days=[3], sell_days=[5], seed=5)
    assert np.all(v[3] > 0) and np.all(v[5] < 0)


def test_trading_dates_skip_weekends():
    from datetime import date
    d = trading_dates(date(2003, 1, 3), 3)
    assert [x.weekday() for x in d] == [4, 0, 1]


def test_trade_log_realizes_targets():
    spec = SynthSpec(n_investors=12, n_days=30, seed=9, cash_scale=1e4)
    data, plan = gen_trade_log(spec)
    recs, rep = parse_trades(data)
    assert rep.rejected == 0 and rep.accepted == len(recs)
    df = trades_frame(recs)
    panel = build_panel(df, plan.investor_ids, calendar=plan.dates)
    np.testing.assert_array_equal(panel.v, plan.target_v)
    closes = plan.bin_prices[:, -1]
    r = daily_returns(df, plan.dates)
    np.testing.assert_allclose(r.raw_return, np.diff(np.log(closes)), rtol=1e-12)
    assert np.all(np.round(plan.bin_prices / TICK) * TICK == plan.bin_prices)
    kept = {p.investor_id for p in filter_active(df, 30, 12, 200)["000001"]}
    assert set(plan.investor_ids) <= kept


def test_trade_log_deterministic():
    spec = SynthSpec(n_investors=4, n_days=5, seed=1)
    assert gen_trade_log(spec)[0] == gen_trade_log(spec)[0]
    assert gen_trade_log(spec)[0] != gen_trade_log(SynthSpec(n_investors=4, n_days=5, seed=2))[0]


def test_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(model="two_factor")
    assert plan_from_spec(SynthSpec(n_investors=3, n_days=4, model="iid_noise")).truth["gammas"] == [0.0] * 3
