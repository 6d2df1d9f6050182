"""Pipeline configuration: one declarative YAML/JSON file plus command-line overrides."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .calendar import bins_per_day, parse_horizon
from .errors import ConfigError
from .leadlag import LAG_SELECTIONS
from .marketdata import PRICE_REFERENCES

SHUFFLE_MODES = ("trade_shuffle", "series_permute")
CATEGORY_METHODS = ("threshold", "bootstrap")
SYNTH_MODELS = ("one_factor", "iid_noise")


@dataclass
class SynthConfig:
    n_investors: int = 120
    n_days: int = 238
    model: str = "one_factor"
    gamma: float = 0.3
    institution_fraction: float = 0.3
    stock_code: str = "000001"
    filename: str = "trades.csv"


@dataclass
class PipelineConfig:
    """Every analysis constant as a named field with its standard default."""

    inputs: list[str] = field(default_factory=list)
    out: str = "out"
    seed: int = 0
    stocks: list[str] | None = None
    jobs: int = 1
    strict: bool = False

    # market data
    min_investor_trades: int = 120
    stock_selection_trades: int = 150
    min_investors_per_stock: int = 120
    top_k: int = 80
    price_ref: str = "close"

    # correlations and spectra
    rolling_window: int = 5
    shuffle_mode: str = "trade_shuffle"
    shuffle_replicas: int = 1000
    null_quantile: float = 0.97725
    eigenvector_alpha: float = 0.05

    # distribution fits
    exp_tail_range: list[float] = field(default_factory=lambda: [0.1, 0.6])
    power_range: list[float] = field(default_factory=lambda: [1e-5, 0.01])
    exp_tail_bins: int = 25
    log_bins_per_decade: int = 20
    interval_count: int = 10
    distfit_shuffle_replicas: int = 100

    # categorization
    bootstrap_replicas: int = 1000
    block_length: int = 20
    bootstrap_quantiles: list[float] = field(default_factory=lambda: [0.02275, 0.97725])
    category_method: str = "threshold"

    # lead-lag
    intraday_minutes: int = 15
    leadlag_max_lag: int = 16
    granger_horizons: list[int] = field(default_factory=lambda: [1, 2, 4, 8, 16])
    granger_max_lag: int = 4
    granger_lag_selection: str = "restricted"
    granger_cvr_horizon: int = 4
    granger_shuffle_control: bool = True
    alpha: float = 0.05

    synth: SynthConfig = field(default_factory=SynthConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> "PipelineConfig":
        def positive(name, integer=True):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int if integer else (int, float)) or v <= 0:
                raise ConfigError(name, f"must be a positive {'integer' if integer else 'number'}, got {v!r}")

        def unit_interval(name, v):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0 < v < 1:
                raise ConfigError(name, f"must lie strictly between 0 and 1, got {v!r}")

        def choice(name, options):
            if getattr(self, name) not in options:
                raise ConfigError(name, f"must be one of {list(options)}, got {getattr(self, name)!r}")

        for name in ("jobs", "min_investor_trades", "stock_selection_trades", "min_investors_per_stock", "top_k",
                     "shuffle_replicas", "exp_tail_bins", "log_bins_per_decade", "interval_count",
                     "distfit_shuffle_replicas", "bootstrap_replicas", "block_length", "intraday_minutes",
                     "leadlag_max_lag", "granger_max_lag", "granger_cvr_horizon"):
            positive(name)
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed", f"must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.rolling_window < 3:
            raise ConfigError("rolling_window", f"must be >= 3, got {self.rolling_window!r}")
        for name in ("shuffle_replicas", "distfit_shuffle_replicas"):
            if getattr(self, name) < 100:
                raise ConfigError(name, f"must be >= 100, got {getattr(self, name)!r}")
        unit_interval("null_quantile", self.null_quantile)
        unit_interval("alpha", self.alpha)
        unit_interval("eigenvector_alpha", self.eigenvector_alpha)
        choice("shuffle_mode", SHUFFLE_MODES)
        choice("category_method", CATEGORY_METHODS)
        choice("price_ref", PRICE_REFERENCES)
        choice("granger_lag_selection", LAG_SELECTIONS)
        for name, rng_ in (("exp_tail_range", self.exp_tail_range), ("power_range", self.power_range)):
            if len(rng_) != 2 or not 0 < rng_[0] < rng_[1] <= 1:
                raise ConfigError(name, f"must be [lo, hi] with 0 < lo < hi <= 1, got {rng_!r}")
        q = self.bootstrap_quantiles
        if len(q) != 2 or not 0 < q[0] < q[1] < 1:
            raise ConfigError("bootstrap_quantiles", f"must be [lo, hi] with 0 < lo < hi < 1, got {q!r}")
        if not self.granger_horizons or any(isinstance(h, bool) or not isinstance(h, int) or h < 1
                                            for h in self.granger_horizons):
            raise ConfigError("granger_horizons", f"must be a non-empty list of positive integers, got "
                                                  f"{self.granger_horizons!r}")
        if self.granger_cvr_horizon not in self.granger_horizons:
            raise ConfigError("granger_cvr_horizon", "must be one of granger_horizons")
        try:
            bins_per_day(parse_horizon(self.intraday_minutes))
        except ValueError as exc:
            raise ConfigError("intraday_minutes", str(exc)) from None
        if self.stocks is not None and not all(isinstance(s, str) and s for s in self.stocks):
            raise ConfigError("stocks", "must be a list of stock codes")
        s = self.synth
        if s.model not in SYNTH_MODELS:
            raise ConfigError("synth.model", f"must be one of {list(SYNTH_MODELS)}, got {s.model!r}")
        if not isinstance(s.n_investors, int) or s.n_investors < 0:
            raise ConfigError("synth.n_investors", f"must be a non-negative integer, got {s.n_investors!r}")
        if not isinstance(s.n_days, int) or s.n_days < 0:
            raise ConfigError("synth.n_days", f"must be a non-negative integer, got {s.n_days!r}")
        if not isinstance(s.gamma, (int, float)) or not abs(s.gamma) < 1:
            raise ConfigError("synth.gamma", f"must satisfy |gamma| < 1, got {s.gamma!r}")
        if not isinstance(s.institution_fraction, (int, float)) or not 0 <= s.institution_fraction <= 1:
            raise ConfigError("synth.institution_fraction", f"must lie in [0, 1], got {s.institution_fraction!r}")
        return self


def _coerce(name, value, default):
    """Accept ints for float fields and strings for list fields given on the command line."""
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if name in ("inputs", "stocks") and isinstance(value, str):
        return [v for v in value.split(",") if v]
    return value


def from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    known = {f.name: f for f in dataclasses.fields(PipelineConfig)}
    base = PipelineConfig()
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(key, "unknown configuration field")
        if key == "synth":
            if not isinstance(value, dict):
                raise ConfigError("synth", "must be a mapping")
            sfields = {f.name for f in dataclasses.fields(SynthConfig)}
            for k in value:
                if k not in sfields:
                    raise ConfigError(f"synth.{k}", "unknown configuration field")
            kwargs[key] = SynthConfig(**{k: _coerce(k, v, getattr(SynthConfig(), k)) for k, v in value.items()})
        else:
            kwargs[key] = _coerce(key, value, getattr(base, key))
    return PipelineConfig(**kwargs)


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Read ``path`` (YAML or JSON), apply non-``None`` overrides, validate."""
    data = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError("config", f"file not found: {path}")
        try:
            text = p.read_text()
            data = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
        except (ValueError, yaml.YAMLError) as exc:
            raise ConfigError("config", f"cannot parse {path}: {exc}") from None
        data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    return from_dict(data).validate()
