"""Per-stock analysis chain and the report files of each stage.

:class:`StockAnalysis` computes every stage lazily, so a subcommand pays only
for what its reports need. Report writers take the list of analyses and
write under an :class:`~invrmt.report.OutputDir`.
"""

from __future__ import annotations

import logging
import warnings
import zlib
from concurrent.futures import ThreadPoolExecutor
from functools import cached_property

import numpy as np
import pandas as pd

from . import classify, distfit, factor, herding, leadlag, spectra, xcorr
from .calendar import DAILY, build_calendar
from .classify import Category
from .config import PipelineConfig
from .errors import ConvergenceError, DegenerateSeriesError, InsufficientDataError
from .inventory import build_panel
from .marketdata import InvestorProfile, daily_returns, period_returns
from .report import OutputDir

logger = logging.getLogger(__name__)


def stock_seed(master: int, stock: str) -> int:
    """Seed of one stock's random draws, derived from the master seed and the stock code."""
    ss = np.random.SeedSequence([int(master), zlib.crc32(stock.encode("utf-8"))])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


class StockAnalysis:
    """All stages for one stock; each attribute is computed on first access."""

    def __init__(self, stock: str, trades: pd.DataFrame, profiles: list[InvestorProfile], cfg: PipelineConfig,
                 shuffle_jobs: int = 1):
        self.stock = stock
        self.trades = trades
        self.profiles = profiles
        self.cfg = cfg
        self.seed = stock_seed(cfg.seed, stock)
        self.shuffle_jobs = shuffle_jobs
        self.skipped: list[dict] = []

    @cached_property
    def calendar(self):
        return build_calendar(self.trades["timestamp"].to_numpy())

    @cached_property
    def daily_full(self):
        return build_panel(self.trades, [p.investor_id for p in self.profiles], DAILY, self.calendar, self.stock,
                           investor_types=[p.investor_type for p in self.profiles])

    @cached_property
    def returns(self):
        r = daily_returns(self.trades, self.calendar, self.cfg.price_ref)
        if r.degenerate:
            raise DegenerateSeriesError(f"{self.stock}: daily returns have zero variance")
        return r

    @cached_property
    def _aligned(self):
        # the first day only provides the reference close of the return series
        panel, dropped = self.daily_full.slice_times(1).drop_degenerate()
        if panel.N < 2:
            raise InsufficientDataError(f"{self.stock}: {panel.N} non-degenerate investors", count=panel.N)
        return panel, dropped

    @property
    def panel(self):
        return self._aligned[0]

    @property
    def dropped(self) -> list[str]:
        return self._aligned[1]

    @property
    def n_t(self) -> int:
        return self.panel.T

    @cached_property
    def V(self) -> np.ndarray:
        return self.panel.standardized()

    @cached_property
    def matrix(self):
        return xcorr.correlation_matrix(self.panel)

    @cached_property
    def rolling(self):
        return xcorr.rolling_mean_correlation(self.panel, self.cfg.rolling_window)

    @cached_property
    def null(self):
        cfg = self.cfg
        if cfg.shuffle_mode == "trade_shuffle":
            return spectra.shuffle_null(self.trades, "trade_shuffle", cfg.shuffle_replicas, self.seed,
                                        cfg.null_quantile, self.shuffle_jobs, keep_coefficients=False,
                                        investor_ids=self.panel.investor_ids, horizon=DAILY,
                                        calendar=self.calendar, drop_first=1)
        return spectra.shuffle_null(self.panel, "series_permute", cfg.shuffle_replicas, self.seed,
                                    cfg.null_quantile, self.shuffle_jobs, keep_coefficients=False)

    @cached_property
    def permuted_coefficients(self) -> np.ndarray:
        """Coefficients of time-permuted panels, the reference sample of the shuffled fit."""
        null = spectra.shuffle_null(self.panel, "series_permute", self.cfg.distfit_shuffle_replicas,
                                    self.seed ^ 0x5EED, jobs=self.shuffle_jobs, keep_coefficients=True)
        return null.coefficients

    @cached_property
    def spectrum(self):
        return spectra.with_null(spectra.eigendecompose(self.matrix), self.null)

    @cached_property
    def slopes(self):
        return factor.type_slopes(self.V, self.panel.investor_types, self.spectrum.eigenvectors[:, 0],
                                  self.returns.normalized_return)

    @cached_property
    def factor_series(self):
        R = self.returns.normalized_return
        return factor.project_factor(self.V, self.spectrum.eigenvectors[:, 0], "all", R=R, times=self.panel.times)

    @cached_property
    def c_vr(self) -> np.ndarray:
        return np.array([classify.corr_with_return(self.panel.v[:, j], self.returns.raw_return)
                         for j in range(self.panel.N)])

    @cached_property
    def threshold_labels(self):
        return [classify.threshold_categorize(c, self.n_t, inv, typ)
                for c, inv, typ in zip(self.c_vr, self.panel.investor_ids, self.panel.investor_types)]

    @cached_property
    def bootstrap_labels(self):
        cfg = self.cfg
        return [classify.bootstrap_categorize(self.panel.v[:, j], self.returns.raw_return, cfg.bootstrap_replicas,
                                              cfg.block_length, tuple(cfg.bootstrap_quantiles), [self.seed, j],
                                              self.panel.investor_ids[j], self.panel.investor_types[j])
                for j in range(self.panel.N)]

    @property
    def categories(self) -> list[Category]:
        labels = self.threshold_labels if self.cfg.category_method == "threshold" else self.bootstrap_labels
        return [l.label for l in labels]

    @cached_property
    def _intraday(self):
        m = self.cfg.intraday_minutes
        full = build_panel(self.trades, self.panel.investor_ids, m, self.calendar, self.stock,
                           investor_types=self.panel.investor_types)
        ret = period_returns(self.trades, m, self.calendar, price_ref=self.cfg.price_ref)
        return full, full.slice_times(1), ret

    @property
    def intraday_full(self):
        return self._intraday[0]

    @property
    def intraday_panel(self):
        return self._intraday[1]

    @property
    def intraday_returns(self):
        return self._intraday[2]

    def _skip(self, what, investor, exc):
        logger.info("%s %s %s skipped: %s", self.stock, investor, what, exc)
        self.skipped.append({"stock": self.stock, "investor_id": investor, "stage": what, "reason": str(exc)})

    @cached_property
    def lagged(self) -> list[tuple[int, object, object]]:
        """(column, autocorrelation, cross-correlation with the return) per non-degenerate intraday series."""
        out = []
        r = self.intraday_returns.raw_return
        for j in range(self.intraday_panel.N):
            v = self.intraday_panel.v[:, j]
            try:
                out.append((j, leadlag.autocorrelation(v, self.cfg.leadlag_max_lag),
                            leadlag.lagged_crosscorrelation(v, r, self.cfg.leadlag_max_lag)))
            except (DegenerateSeriesError, InsufficientDataError) as exc:
                self._skip("lagged correlation", self.intraday_panel.investor_ids[j], exc)
        return out

    def _granger(self, shuffled: bool):
        cfg = self.cfg
        r = self.intraday_returns.raw_return
        horizons = [cfg.granger_cvr_horizon] if shuffled else cfg.granger_horizons
        out = []
        for j, inv in enumerate(self.intraday_panel.investor_ids):
            v = self.intraday_panel.v[:, j]
            if shuffled:
                v = np.random.default_rng([self.seed, 2, j]).permutation(v)
            for dT in horizons:
                try:
                    out.extend(leadlag.granger_pair(v, r, dT, cfg.granger_max_lag, cfg.alpha, cfg.granger_lag_selection,
                                                    investor_id=inv,
                                                    c_vr=float(self.c_vr[j]), n_t=self.n_t, stock=self.stock,
                                                    investor_type=self.panel.investor_types[j].value,
                                                    category=self.categories[j].value))
                except (InsufficientDataError, np.linalg.LinAlgError) as exc:
                    self._skip(f"granger dT={dT}", inv, exc)
        return out

    @cached_property
    def granger(self):
        return self._granger(shuffled=False)

    @cached_property
    def granger_shuffled(self):
        return self._granger(shuffled=True)

    @cached_property
    def herding(self):
        return herding.herding_day_counts(self.panel.v, self.panel.investor_types, self.categories,
                                          self.panel.times, self.stock, self.cfg.alpha)


def run_stages(analyses: list[StockAnalysis], stages: list[str], jobs: int = 1):
    """Evaluate the named attributes of every analysis, stocks in parallel."""
    def work(a):
        for s in stages:
            getattr(a, s)
        return a

    if jobs > 1 and len(analyses) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(work, analyses))
    else:
        for a in analyses:
            work(a)


# ----------------------------------------------------------------------------
# report writers


def write_ingest(out: OutputDir, ctx):
    for name, report in ctx.parse_reports:
        out.json(f"ingest/parse_report_{name}.json", report.to_dict())
    cfg = ctx.cfg
    for stock, profiles in sorted(ctx.all_profiles.items()):
        retained = ctx.retained.get(stock)
        kept = {p.investor_id for p in retained or []}
        profiles = sorted(profiles, key=lambda p: (-p.transaction_count, p.investor_id))
        out.json(f"ingest/profiles_{stock}.json", {
            "stock": stock,
            "included": retained is not None,
            "thresholds": {"min_investor_trades": cfg.min_investor_trades,
                           "stock_selection_trades": cfg.stock_selection_trades,
                           "min_investors_per_stock": cfg.min_investors_per_stock, "top_k": cfg.top_k},
            "investors_total": len(profiles),
            "investors_active": sum(p.transaction_count >= cfg.stock_selection_trades for p in profiles),
            "retained": [{"investor_id": p.investor_id, "type": p.investor_type.value,
                          "transaction_count": p.transaction_count, "retained": p.investor_id in kept}
                         for p in profiles if p.transaction_count >= cfg.min_investor_trades],
        })


def write_inventory(out: OutputDir, ctx):
    for a in ctx.analyses:
        m = ctx.cfg.intraday_minutes
        for panel, tag in ((a.daily_full, "daily"), (a.intraday_full, f"{m}min")):
            base = f"inventory/{a.stock}_{tag}"
            panel.write(out.path(base + ".csv"), out.path(base + ".json"))
            out.external(base + ".csv")
            out.external(base + ".json")


def write_xcorr(out: OutputDir, ctx):
    for a in ctx.analyses:
        C = a.matrix
        out.csv(f"xcorr/{a.stock}_matrix.csv", [dict(zip(C.labels, row)) for row in C.values], list(C.labels))
        ends, means = a.rolling
        ret = dict(zip(a.returns.dates, a.returns.normalized_return))
        out.csv(f"xcorr/{a.stock}_rolling.csv",
                [{"period": e, "mean_C": m, "R": ret.get(e)} for e, m in zip(ends, means)])
        out.json(f"xcorr/{a.stock}_excluded.json", {"stock": a.stock, "degenerate": a.dropped})
    pooled = xcorr.pooled_coefficients([a.matrix for a in ctx.analyses])
    for group, sample in pooled.samples.items():
        out.column(f"xcorr/pooled_{group}.csv", "C", sample)
    out.json("xcorr/pooled_means.json", {g: {"mean": pooled.means[g], "n": len(s)}
                                         for g, s in pooled.samples.items()})


def _fit(model, fn, sample, group, sign=None, **kw):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            res = fn(sample, sign=sign, **kw) if sign is not None else fn(sample, **kw)
            d = res.to_dict()
        except (InsufficientDataError, ConvergenceError) as exc:
            d = {"model": model, "error": str(exc)}
    d.update(group=group, sign=sign, warnings=[str(w.message) for w in caught])
    return d


def write_distfit(out: OutputDir, ctx):
    cfg = ctx.cfg
    pooled = xcorr.pooled_coefficients([a.matrix for a in ctx.analyses])
    lo, hi = cfg.power_range
    power_bins = max(1, int(np.ceil(cfg.log_bins_per_decade * np.log10(hi / lo) - 1e-9)))
    fits = []
    for group, sample in pooled.samples.items():
        for sign in (1, -1):
            fits.append(_fit("exp_tail", distfit.fit_exponential_tail, sample, group, sign,
                             range=tuple(cfg.exp_tail_range), n_bins=cfg.exp_tail_bins))
            fits.append(_fit("power_bulk", distfit.fit_power_bulk, sample, group, sign,
                             range=tuple(cfg.power_range), n_bins=power_bins))
        counts = distfit.interval_counts(sample, cfg.interval_count)
        keys = ("lower", "upper", "positive", "negative", "log_positive", "log_negative")
        out.csv(f"distfit/interval_counts_{group}.csv",
                [{k: counts[k][i] for k in keys} for i in range(cfg.interval_count)], list(keys))
    shuffled = np.concatenate([a.permuted_coefficients for a in ctx.analyses]) if ctx.analyses else np.empty(0)
    fits.append(_fit("exp_shuffled", distfit.fit_shuffled_exponential, shuffled, "shuffled"))
    out.json("distfit/fits.json", fits)


def write_spectra(out: OutputDir, ctx):
    cfg = ctx.cfg
    tests = []
    for a in ctx.analyses:
        s = a.spectrum
        body = s.to_dict()
        body.update(stock=a.stock, N=s.N, T=a.n_t, null_mode=a.null.mode, null_quantile=cfg.null_quantile,
                    investor_ids=s.labels, leading_eigenvector=s.eigenvectors[:, 0])
        out.json(f"spectra/{a.stock}.json", body)
        out.csv(f"spectra/{a.stock}_null.csv", [{"replica": k, "largest": x} for k, x in enumerate(a.null.largest)])
        tests.append(_gauss_test(a.stock, "bulk", [s], cfg.eigenvector_alpha))
    specs = [a.spectrum for a in ctx.analyses]
    for sel in ("rank1", "rank2"):
        tests.append(_gauss_test("pooled", sel, specs, cfg.eigenvector_alpha))
    out.json("spectra/eigenvector_tests.json", tests)


def _gauss_test(stock, selector, specs, alpha):
    try:
        r = spectra.gaussian_component_test(spectra.eigenvector_component_sample(specs, selector), alpha)
        return {"stock": stock, "selector": selector, "statistic": r.statistic, "p_value": r.p_value,
                "gaussian": r.passed, "n": r.n}
    except (InsufficientDataError, ValueError) as exc:
        return {"stock": stock, "selector": selector, "error": str(exc)}


def write_factor(out: OutputDir, ctx):
    rows = []
    for a in ctx.analyses:
        row = a.slopes.row(a.stock)
        row["orientation"] = a.slopes.orientation_sign
        rows.append(row)
        g = a.factor_series
        out.csv(f"factor/{a.stock}_factor.csv", [{"period": t, "G": x, "R": r}
                                                 for t, x, r in zip(g.times, g.G, a.returns.normalized_return)])
    cols = ["stock", "k", "k_stderr", "k_ind", "k_ind_stderr", "k_ins", "k_ins_stderr", "orientation"]
    out.csv("factor/slopes.csv", rows, cols)


def write_classify(out: OutputDir, ctx):
    summary = []
    for a in ctx.analyses:
        rows = [{"investor_id": t.investor_id, "type": t.investor_type.value, "C_VR": t.c_vr,
                 "threshold_label": t.label.value, "bootstrap_label": b.label.value,
                 "bootstrap_lower": b.lower, "bootstrap_upper": b.upper}
                for t, b in zip(a.threshold_labels, a.bootstrap_labels)]
        out.csv(f"classify/{a.stock}_categories.csv", rows)
        sm = classify.sort_matrix_by_cvr(a.matrix, a.c_vr)
        out.csv(f"classify/{a.stock}_sorted_matrix.csv",
                [dict(zip(sm.matrix.labels, row)) for row in sm.matrix.values], list(sm.matrix.labels))
        for method, labels in (("threshold", a.threshold_labels), ("bootstrap", a.bootstrap_labels)):
            counts = classify.category_counts(labels)
            row = {"stock": a.stock, "method": method, "N_T": a.n_t}
            for key in ("all", "ind", "ins"):
                sfx = "" if key == "all" else f"_{key}"
                c = counts[key]
                row.update({f"N{sfx}": c["N"], f"N_tr{sfx}": c["trending"], f"N_re{sfx}": c["reversing"],
                            f"N_un{sfx}": c["uncategorized"]})
            summary.append(row)
    out.csv("classify/summary.csv", summary, _summary_columns())


def _summary_columns():
    cols = ["stock", "method", "N_T"]
    for sfx in ("", "_ind", "_ins"):
        cols += [f"N{sfx}", f"N_tr{sfx}", f"N_re{sfx}", f"N_un{sfx}"]
    return cols


_GRANGER_COLS = ["stock", "investor_id", "type", "category", "C_VR", "direction", "delta_T", "p", "F",
                 "p_value", "I", "n_obs"]


def _granger_rows(results):
    return [{"stock": r.meta["stock"], "investor_id": r.investor_id, "type": r.meta["investor_type"],
             "category": r.meta["category"], "C_VR": r.c_vr, "direction": r.direction, "delta_T": r.delta_T,
             "p": r.lag_order, "F": r.F, "p_value": r.p_value, "I": r.indicator, "n_obs": r.n_obs}
            for r in results]


def _lagged_rows(groups: dict, kind: str):
    rows = []
    for (cat, typ), lc in sorted(groups.items()):
        for lag, val, band in zip(lc.lags, lc.values, lc.band):
            rows.append({"function": kind, "category": cat, "type": typ, "members": lc.members,
                         "lag": int(lag), "value": val, "band": band})
    return rows


def write_leadlag(out: OutputDir, ctx):
    cfg = ctx.cfg
    results = [r for a in ctx.analyses for r in a.granger]
    out.csv("leadlag/indicators.csv", _granger_rows(results), _GRANGER_COLS)
    out.csv("leadlag/aggregate_horizon.csv", leadlag.aggregate_indicators(results, "horizon"),
            ["direction", "delta_T", "n", "E_I"])
    cvr_cols = ["data", "direction", "delta_T", "bin", "lower", "upper", "uncategorized", "n", "E_I"]
    at_cvr = [r for r in results if r.delta_T == cfg.granger_cvr_horizon]
    rows = [dict(row, data="original") for row in leadlag.aggregate_indicators(at_cvr, "cvr_bin")]
    if cfg.granger_shuffle_control:
        shuffled = [r for a in ctx.analyses for r in a.granger_shuffled]
        out.csv("leadlag/indicators_shuffled.csv", _granger_rows(shuffled), _GRANGER_COLS)
        rows += [dict(row, data="shuffled") for row in leadlag.aggregate_indicators(shuffled, "cvr_bin")]
    out.csv("leadlag/aggregate_cvr_bin.csv", rows, cvr_cols)

    acfs, ccfs, keys = [], [], []
    for a in ctx.analyses:
        cats = a.categories
        for j, acf, ccf in a.lagged:
            for typ in (a.panel.investor_types[j].value, "all"):
                acfs.append(acf)
                ccfs.append(ccf)
                keys.append((cats[j].value, typ))
    rows = _lagged_rows(leadlag.group_average_correlation(acfs, keys), "autocorrelation")
    rows += _lagged_rows(leadlag.group_average_correlation(ccfs, keys), "crosscorrelation")
    out.csv("leadlag/group_correlations.csv", rows,
            ["function", "category", "type", "members", "lag", "value", "band"])
    skipped = [s for a in ctx.analyses for s in a.skipped]
    out.json("leadlag/skipped.json", skipped)


def write_herding(out: OutputDir, ctx):
    rows = [herding.herding_row(a.herding) for a in ctx.analyses]
    cols = ["stock", "trading_days"]
    for cat in (Category.REVERSING, Category.TRENDING, Category.UNCATEGORIZED):
        for sfx in ("d", "s"):
            cols += [f"{cat.value}_n+_{sfx}", f"{cat.value}_n-_{sfx}"]
    out.csv("herding/herding.csv", rows, cols)


#: report writers and the stages they need, per subcommand
STAGES = {
    "ingest": (write_ingest, []),
    "inventory": (write_inventory, ["daily_full", "_intraday"]),
    "xcorr": (write_xcorr, ["matrix", "rolling"]),
    "distfit": (write_distfit, ["matrix", "permuted_coefficients"]),
    "spectra": (write_spectra, ["spectrum"]),
    "factor": (write_factor, ["slopes", "factor_series"]),
    "classify": (write_classify, ["threshold_labels", "bootstrap_labels"]),
    "leadlag": (write_leadlag, ["threshold_labels", "bootstrap_labels", "granger", "granger_shuffled", "lagged"]),
    "herding": (write_herding, ["threshold_labels", "bootstrap_labels", "herding"]),
}
ALL_ORDER = ["ingest", "inventory", "xcorr", "distfit", "spectra", "factor", "classify", "leadlag", "herding"]


def stage_list(command: str, cfg: PipelineConfig) -> list[str]:
    names = ALL_ORDER if command == "all" else [command]
    stages = []
    for n in names:
        for s in STAGES[n][1]:
            if s == "granger_shuffled" and not cfg.granger_shuffle_control:
                continue
            if s.endswith("_labels") and n != "classify" and not s.startswith(cfg.category_method):
                continue
            if s not in stages:
                stages.append(s)
    return stages

