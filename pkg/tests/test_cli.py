import json
import math
import os

import pytest

from dysonlab import cli


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_grid_parsing():
    assert cli._parse_grid("1e-3,1e-6") == (1e-3, 1e-6)
    assert cli._parse_grid("geometric:0.1:4") == (0.1, 0.05, 0.025, 0.0125)
    assert cli._parse_grid("geometric:0.2:3:0.1") == pytest.approx((0.2, 0.02, 0.002))


def test_build_config_flags_and_env(monkeypatch):
    monkeypatch.setenv("DCL_WORKERS", "3")
    cfg = cli.build_config(["sde", "--beta", "1.5", "--N", "inf", "--paths", "250"])
    assert cfg.workers == 3
    assert cfg.beta == 1.5
    assert math.isinf(cfg.N)
    assert cfg.paths == 250
    monkeypatch.delenv("DCL_WORKERS")
    cfg = cli.build_config(["sde", "--workers", "2"])
    assert cfg.workers == 2


def test_config_file_with_flag_override(tmp_path):
    cfgfile = tmp_path / "exp.cfg"
    cfgfile.write_text("beta = 0.7\nseed = 9\n# comment\nr-grid = 0.1,0.05\n")
    cfg = cli.build_config(["bochner", "--config", str(cfgfile), "--seed", "11"])
    assert cfg.beta == 0.7
    assert cfg.seed == 11  # flag wins over file
    assert cfg.r_grid == (0.1, 0.05)


def test_expect_tokens_parse():
    cfg = cli.build_config(["all", "--expect", "be-holds,cap-null", "--expect", "no-collisions"])
    assert cfg.expect == ("be-holds", "cap-null", "no-collisions")


def test_invalid_parameters_exit_code(tmp_path, capsys):
    cfg = cli.RunConfig(subcommand="sde", beta=-1.0, out=str(tmp_path))
    assert cli.run(cfg) == 2
    err = json.loads(capsys.readouterr().out)
    assert "error" in err


def test_bochner_rejects_high_beta(tmp_path):
    cfg = cli.RunConfig(subcommand="bochner", beta=1.5, out=str(tmp_path))
    assert cli.run(cfg) == 2


def test_heat_run_and_expectations(tmp_path):
    out = str(tmp_path / "h")
    cfg = cli.RunConfig(subcommand="heat", beta=1.5, grid=256, out=out, expect=("be-holds",))
    assert cli.run(cfg) == 0
    with open(os.path.join(out, "heat_margins.csv")) as fh:
        assert fh.readline().strip() == "beta,N,t,grid,datum,margin,trend"
    cfg = cli.RunConfig(subcommand="heat", beta=0.5, grid=256, out=out, expect=("be-holds",))
    assert cli.run(cfg) == 1  # verdict mismatch


def test_capacity_run_outputs(tmp_path):
    out = str(tmp_path / "c")
    cfg = cli.RunConfig(subcommand="capacity", beta=1.0, s_grid=(1e-3, 1e-6, 1e-9), out=out)
    assert cli.run(cfg) == 0
    summary = json.loads(read(os.path.join(out, "capacity_summary.json")))
    assert summary["verdict"] == "cap-null"
    with open(os.path.join(out, "capacity_cutoff.csv")) as fh:
        assert fh.readline().strip() == "beta,s_or_eps,value,err_est"


def test_sde_run_outputs(tmp_path):
    out = str(tmp_path / "s")
    cfg = cli.RunConfig(subcommand="sde", beta=1.5, paths=120, out=out, expect=("no-collisions",))
    assert cli.run(cfg) == 0
    summary = json.loads(read(os.path.join(out, "sde_summary.json")))
    assert summary["frequency"] <= 0.02


def test_ricci_run_outputs(tmp_path):
    out = str(tmp_path / "r")
    cfg = cli.RunConfig(subcommand="ricci", beta=0.5, n=4, samples=200, out=out)
    assert cli.run(cfg) == 0
    summary = json.loads(read(os.path.join(out, "ricci_summary.json")))
    assert summary["verdict"] == "nonnegative"
    with open(os.path.join(out, "ricci_hist.csv")) as fh:
        assert fh.readline().strip() == "bin_lo,bin_hi,count"


def test_repeat_runs_byte_identical(tmp_path):
    base = dict(subcommand="all", beta=0.8, paths=120, samples=100, grid=128,
                s_grid=(1e-3, 1e-5), seed=21)
    out1 = str(tmp_path / "a")
    out2 = str(tmp_path / "b")
    out3 = str(tmp_path / "w")
    assert cli.run(cli.RunConfig(out=out1, **base)) == 0
    assert cli.run(cli.RunConfig(out=out2, **base)) == 0
    assert cli.run(cli.RunConfig(out=out3, workers=2, **base)) == 0
    names = sorted(os.listdir(out1))
    assert names == sorted(os.listdir(out2)) == sorted(os.listdir(out3))
    for name in names:
        blob = read(os.path.join(out1, name))
        assert blob == read(os.path.join(out2, name)), name
        assert blob == read(os.path.join(out3, name)), name
