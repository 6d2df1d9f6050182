"""``invrmt`` command line.

Every subcommand reads the trade logs given as arguments (or ``inputs`` in
the config), runs the stages its reports need and writes them under
``--out`` together with ``manifest.json``. Failures exit nonzero and leave a
JSON error record on stderr and in ``<out>/error.json``.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd
import scipy
import yaml

from . import __version__
from .config import PipelineConfig, load_config
from .errors import InputError, InvrmtError, UsageError
from .inventory import InventoryPanel
from .marketdata import filter_active, investor_profiles, read_trades, trades_frame
from .pipeline import ALL_ORDER, STAGES, StockAnalysis, run_stages, stage_list
from .report import OutputDir, sha256_file
from .synth import SynthSpec, gen_trade_log

logger = logging.getLogger("invrmt")

COMMANDS = ALL_ORDER + ["synth", "all"]


@dataclass
class RunContext:
    cfg: PipelineConfig
    parse_reports: list = field(default_factory=list)
    all_profiles: dict = field(default_factory=dict)
    retained: dict = field(default_factory=dict)
    analyses: list = field(default_factory=list)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON configuration file")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--stocks", help="comma-separated stock codes to analyze")
    common.add_argument("--jobs", type=int, help="stocks analyzed in parallel")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = _Parser(prog="invrmt", description="Inventory-variation correlation analysis of trade logs.")
    parser.add_argument("--version", action="version", version=f"invrmt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name != "synth":
            p.add_argument("inputs", nargs="*", help="trade-log CSV files")
    return parser


def versions() -> dict:
    return {"invrmt": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pandas": pd.__version__, "pyyaml": yaml.__version__}


def _load(cfg: PipelineConfig, ctx: RunContext):
    if not cfg.inputs:
        raise InputError("no input trade logs given")
    frames = []
    for i, path in enumerate(cfg.inputs):
        if not Path(path).is_file():
            raise InputError(f"input not found: {path}")
        records, report = read_trades(path, strict=cfg.strict)
        ctx.parse_reports.append((f"{i}_{Path(path).stem}", report))
        frames.append(trades_frame(records))
    df = pd.concat(frames, ignore_index=True) if len(frames) > 1 else frames[0]
    if len(frames) > 1:
        df = df.sort_values(["stock", "timestamp"], kind="stable").reset_index(drop=True)
    if cfg.stocks is not None:
        missing = sorted(set(cfg.stocks) - set(df["stock"]))
        if missing:
            raise InputError(f"stocks not present in the inputs: {missing}")
        df = df[df["stock"].isin(cfg.stocks)].reset_index(drop=True)
    ctx.all_profiles = investor_profiles(df)
    ctx.retained = filter_active(df, cfg.min_investor_trades, cfg.min_investors_per_stock, cfg.top_k,
                                 cfg.stock_selection_trades)
    if not ctx.retained:
        logger.warning("no stock passes the activity filter")
    stocks = sorted(ctx.retained)
    shuffle_jobs = cfg.jobs if len(stocks) == 1 else 1
    for stock in stocks:
        sdf = df[df["stock"] == stock].reset_index(drop=True)
        ctx.analyses.append(StockAnalysis(stock, sdf, ctx.retained[stock], cfg, shuffle_jobs))
    return df


def _synth(cfg: PipelineConfig, out: OutputDir):
    s = cfg.synth
    spec = SynthSpec(n_investors=s.n_investors, n_days=s.n_days, model=s.model, gamma=s.gamma,
                     institution_fraction=s.institution_fraction, stock_code=s.stock_code, seed=cfg.seed)
    data, plan = gen_trade_log(spec)
    rel = f"synth/{s.filename}"
    out.path(rel).write_bytes(data)
    out.external(rel)
    panel = InventoryPanel(plan.stock_code, "daily", [d.isoformat() for d in plan.dates], plan.investor_ids,
                           plan.investor_types, plan.target_v)
    panel.write(out.path("synth/planted_daily.csv"), out.path("synth/planted_daily.json"))
    out.external("synth/planted_daily.csv")
    out.external("synth/planted_daily.json")
    out.json("synth/truth.json", {"stock": plan.stock_code, "investor_ids": plan.investor_ids,
                                  "investor_types": [t.value for t in plan.investor_types], **plan.truth})


def run(command: str, cfg: PipelineConfig) -> dict:
    """Execute ``command``; returns the manifest."""
    out = OutputDir(cfg.out)
    (out.root / "error.json").unlink(missing_ok=True)
    ctx = RunContext(cfg)
    inputs = []
    if command == "synth":
        _synth(cfg, out)
    else:
        _load(cfg, ctx)
        inputs = [{"path": p, "sha256": sha256_file(p)} for p in cfg.inputs]
        run_stages(ctx.analyses, stage_list(command, cfg), cfg.jobs)
        for name in ALL_ORDER if command == "all" else [command]:
            STAGES[name][0](out, ctx)
    return out.manifest({
        "command": command,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "inputs": inputs,
        "stocks": [a.stock for a in ctx.analyses],
        "versions": versions(),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    })


def error_record(exc: BaseException) -> dict:
    code = exc.exit_code if isinstance(exc, InvrmtError) else 1
    rec = {"error": type(exc).__name__, "exit_code": code, "message": str(exc)}
    if hasattr(exc, "field"):
        rec["field"] = exc.field
    return rec


def main(argv=None) -> int:
    out_dir = None
    try:
        args = build_parser().parse_args(argv)
        out_dir = args.out
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        overrides = {"seed": args.seed, "out": args.out, "stocks": args.stocks, "jobs": args.jobs}
        if getattr(args, "inputs", None):
            overrides["inputs"] = args.inputs
        cfg = load_config(args.config, overrides)
        out_dir = cfg.out
        run(args.command, cfg)
        return 0
    except Exception as exc:  # every failure becomes an error record and an exit code
        rec = error_record(exc)
        if not isinstance(exc, InvrmtError):
            logger.exception("unexpected failure")
        print(json.dumps(rec, sort_keys=True), file=sys.stderr)
        if out_dir is not None:
            try:
                path = Path(out_dir) / "error.json"
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
            except OSError:
                pass
        return rec["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
