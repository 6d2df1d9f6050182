import json
import subprocess
import sys

import pytest
import yaml

from invrmt.cli import main
from invrmt.config import PipelineConfig, load_config
from invrmt.errors import ConfigError

SMALL = {
    "min_investor_trades": 60, "stock_selection_trades": 60, "min_investors_per_stock": 30, "top_k": 40,
    "shuffle_replicas": 100, "bootstrap_replicas": 200, "synth": {"n_investors": 40, "n_days": 120},
}


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg = root / "c.yaml"
    cfg.write_text(yaml.safe_dump(SMALL))
    assert main(["synth", "--config", str(cfg), "--out", str(root / "syn"), "--seed", "3"]) == 0
    trades = root / "syn" / "synth" / "trades.csv"
    assert main(["all", str(trades), "--config", str(cfg), "--out", str(root / "a"), "--seed", "3"]) == 0
    return root, cfg, trades


def test_defaults_validate():
    cfg = load_config()
    assert cfg == PipelineConfig().validate()
    assert cfg.top_k == 80 and cfg.null_quantile == 0.97725 and cfg.granger_lag_selection == "restricted"


def test_overrides_and_coercion(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"alpha": 0.1, "null_quantile": 1}))
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert err.value.field == "null_quantile"
    p.write_text(json.dumps({"alpha": 0.1, "seed": 4}))
    cfg = load_config(p, {"seed": 9, "stocks": "a,b", "jobs": None})
    assert cfg.seed == 9 and cfg.stocks == ["a", "b"] and cfg.alpha == 0.1 and cfg.jobs == 1


@pytest.mark.parametrize("data,field", [
    ({"bogus": 1}, "bogus"), ({"top_k": 0}, "top_k"), ({"shuffle_mode": "x"}, "shuffle_mode"),
    ({"synth": {"model": "x"}}, "synth.model"), ({"synth": {"nope": 1}}, "synth.nope"),
    ({"granger_cvr_horizon": 3}, "granger_cvr_horizon"), ({"rolling_window": 2}, "rolling_window"),
    ({"intraday_minutes": 7}, "intraday_minutes"), ({"seed": -1}, "seed"),
])
def test_invalid_fields_named(tmp_path, data, field):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump(data))
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert err.value.field == field


def test_exit_codes_and_error_record(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    p.write_text("top_k: -3\n")
    out = tmp_path / "o"
    assert main(["xcorr", "x.csv", "--config", str(p), "--out", str(out)]) == 2
    rec = json.loads((out / "error.json").read_text())
    assert rec == {"error": "ConfigError", "exit_code": 2, "field": "top_k", "message": rec["message"]}
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["exit_code"] == 2
    assert main(["xcorr", str(tmp_path / "missing.csv"), "--out", str(out)]) == 3
    assert main(["xcorr", "--out", str(out)]) == 3
    assert main(["nonsense"]) == 5
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert main(["ingest", str(bad), "--out", str(out)]) == 3


def test_unknown_stock_is_input_error(small_run, tmp_path):
    _, cfg, trades = small_run
    assert main(["ingest", str(trades), "--config", str(cfg), "--out", str(tmp_path), "--stocks", "999999"]) == 3


def test_all_writes_reports_and_manifest(small_run):
    root, _, trades = small_run
    out = root / "a"
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "all" and man["seed"] == 3 and man["stocks"] == ["000001"]
    assert man["inputs"][0]["sha256"] and {"numpy", "scipy", "pandas", "invrmt"} <= set(man["versions"])
    paths = {f["path"] for f in man["files"]}
    for rel in ("spectra/000001.json", "classify/summary.csv", "leadlag/indicators.csv", "herding/herding.csv",
                "factor/slopes.csv", "distfit/fits.json", "xcorr/000001_matrix.csv", "inventory/000001_daily.csv"):
        assert rel in paths and (out / rel).is_file()
    spec = json.loads((out / "spectra/000001.json").read_text())
    assert spec["deviating_ranks"][:1] == [1]
    assert not (out / "error.json").exists()


def test_rerun_is_byte_identical_and_job_independent(small_run, tmp_path):
    root, cfg, trades = small_run
    assert main(["all", str(trades), "--config", str(cfg), "--out", str(tmp_path), "--seed", "3",
                 "--jobs", "2"]) == 0
    ref = {f["path"]: f["sha256"] for f in json.loads((root / "a" / "manifest.json").read_text())["files"]}
    new = {f["path"]: f["sha256"] for f in json.loads((tmp_path / "manifest.json").read_text())["files"]}
    assert ref == new


def test_single_stage_matches_all(small_run, tmp_path):
    root, cfg, trades = small_run
    assert main(["spectra", str(trades), "--config", str(cfg), "--out", str(tmp_path), "--seed", "3"]) == 0
    assert (tmp_path / "spectra/000001.json").read_bytes() == (root / "a/spectra/000001.json").read_bytes()


def test_console_script_version():
    res = subprocess.run([sys.executable, "-m", "invrmt.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("invrmt ")
