import csv
import json
import math

import numpy as np
import pytest

from nonlocal_mems.errors import ConfigError
from nonlocal_mems.geometry import build_domain, interval
from nonlocal_mems.runner import cli
from nonlocal_mems.runner.config import EXPERIMENTS, KEYS, describe_keys, load_config
from nonlocal_mems.runner.experiments import initial_data, run
from nonlocal_mems.runner.plots import emit_plots
from nonlocal_mems.runner.record import (
    FAIL, PASS, SCHEMA, SERIES_COLUMNS, SKIPPED, ResultRecord, write_record,
)

SMALL = ["domain.resolution=32"]


def test_defaults():
    cfg = load_config("evolve")
    assert cfg.domain.kind == "interval" and cfg.domain.dim == 1
    assert cfg.domain.resolution == 256 and cfg.lam == 0.5 and cfg.u0 == "zero"
    assert cfg.out_dir.as_posix() == "results/evolve"
    assert load_config("evolve", overrides=["domain.kind=ball"]).domain.dim == 2


def test_ini_file_and_overrides(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[domain]\nkind = ball\ndim = 3\nresolution = 64\n"
                   "[params]\nchi = 0.2\nlambdas = 1, 2, 4\n[output]\nplots = no\n")
    cfg = load_config("quench-sweep", str(ini), ["params.chi=0.3", "evolve.t_max=2"],
                      out=str(tmp_path))
    assert cfg.domain.dim == 3 and cfg.domain.resolution == 64
    assert cfg.chi == 0.3 and cfg.lambdas == (1.0, 2.0, 4.0)
    assert cfg.evolve.t_max == 2.0 and cfg.plots is False
    assert cfg.out_dir == tmp_path / "quench-sweep"
    echo = cfg.echo()
    assert echo["domain.kind"] == "ball" and echo["params.lambdas"] == [1.0, 2.0, 4.0]


@pytest.mark.parametrize("overrides", [
    ["domain.colour=red"],
    ["nokey"],
    ["domain.resolution=8"],
    ["domain.resolution=abc"],
    ["domain.kind=torus"],
    ["params.chi=-1"],
    ["params.lambdas=3, 1"],
    ["params.lambdas=a, b"],
    ["params.u0=gaussian"],
    ["params.u0=eigen:x"],
    ["evolve.quench_tol=0.7"],
    ["picard.k_max=0"],
    ["output.plots=maybe"],
])
def test_config_errors(overrides):
    with pytest.raises(ConfigError):
        load_config("evolve", overrides=overrides)


def test_config_missing_file_and_experiment(tmp_path):
    with pytest.raises(ConfigError):
        load_config("evolve", str(tmp_path / "none.ini"))
    with pytest.raises(ConfigError):
        load_config("fly")
    bad = tmp_path / "bad.ini"
    bad.write_text("no section header\n")
    with pytest.raises(ConfigError):
        load_config("evolve", str(bad))


def test_describe_keys_lists_everything():
    text = describe_keys()
    for sec, key in KEYS:
        assert f"{sec}.{key}" in text


def test_initial_data(tmp_path):
    d = build_domain(interval(1.0, 16))
    assert np.all(initial_data(d, "zero") == 0)
    assert initial_data(d, "eigen:0.3").max() == pytest.approx(0.3)
    assert initial_data(d, "steady:0.2").max() > 0
    one = tmp_path / "u0.txt"
    np.savetxt(one, 0.1 * np.ones(d.n_nodes))
    assert np.all(initial_data(d, f"file:{one}") == 0.1)
    two = tmp_path / "u0.csv"
    np.savetxt(two, np.column_stack([[1.0, -1.0], [0.0, 0.4]]), delimiter=",")
    assert initial_data(d, f"file:{two}")[d.n_nodes // 2] == pytest.approx(0.2)
    with pytest.raises(ConfigError):
        initial_data(d, f"file:{tmp_path / 'missing.txt'}")
    short = tmp_path / "short.txt"
    np.savetxt(short, np.ones(3))
    with pytest.raises(ConfigError):
        initial_data(d, f"file:{short}")


def test_record_round_trip(tmp_path):
    rec = ResultRecord("evolve", {"params.chi": 1.0})
    rec.scalar("x", np.float64(1.5), "time", "a value")
    rec.scalar("missing", math.nan)
    rec.scalar("flags", [np.bool_(True), np.int64(3), math.inf])
    rec.add_series("s", {"t": np.arange(3.0), "y": [1, 2, None]})
    rec.verdict("good", True, "fine")
    rec.skip("later", "not applicable")
    path = write_record(rec, tmp_path)
    back = ResultRecord.read(path)
    assert back == rec
    assert back.value("missing") is None and back.value("flags") == [True, 3, None]
    data = json.loads(path.read_text())
    assert data["schema"] == SCHEMA
    assert rec.ok and not rec.failed
    rec.fail("bad", "broken")
    assert rec.failed == ["bad"] and not rec.ok
    assert {v["status"] for v in rec.verdicts.values()} == {PASS, SKIPPED, FAIL}
    with pytest.raises(ValueError):
        ResultRecord.from_dict({**data, "schema": "other@2"})


def test_series_csv(tmp_path):
    rec = ResultRecord("evolve")
    write_record(rec, tmp_path, {"t": [0.0, 0.1], "sup_u": [0.0, 0.25], "E": [0.0, 0.1]})
    rows = list(csv.reader(open(tmp_path / "series.csv")))
    assert tuple(rows[0]) == SERIES_COLUMNS
    assert rows[2][:3] == ["0.1", "0.25", "0.1"] and rows[2][3:] == ["", "", ""]


def test_evolve_zero_run(tmp_path):
    cfg = load_config("evolve", overrides=SMALL + ["params.lambda=0"], out=str(tmp_path))
    rec = run(cfg)
    assert rec.ok and all(v["status"] in (PASS, SKIPPED) for v in rec.verdicts.values())
    assert rec.verdicts["zero_stays_zero"]["status"] == PASS
    rows = list(csv.DictReader(open(cfg.out_dir / "series.csv")))
    assert len(rows) > 1 and all(float(r["sup_u"]) == 0 for r in rows)
    assert (cfg.out_dir / "record.json").is_file()
    assert (cfg.out_dir / "sup_u.svg").is_file()


def test_thresholds_disk(tmp_path):
    cfg = load_config("thresholds", overrides=["domain.kind=ball", "domain.resolution=64",
                                               "params.chi=0.1", "output.plots=false"],
                      out=str(tmp_path))
    rec = run(cfg)
    assert rec.value("lambda_N_upper") == pytest.approx(3.4540, abs=1e-3)
    assert rec.ok


def test_steady_branch_plot(tmp_path):
    cfg = load_config("steady-branch", overrides=SMALL, out=str(tmp_path))
    rec = run(cfg)
    assert rec.ok
    svg = (cfg.out_dir / "bifurcation.svg").read_text()
    assert svg.startswith("<?xml") and "<svg" in svg


def test_quench_sweep_plot(tmp_path):
    cfg = load_config("quench-sweep", overrides=SMALL + ["params.chi=0.4"], out=str(tmp_path))
    rec = run(cfg)
    assert rec.ok, rec.failed
    assert rec.value("C3") > 0
    assert (cfg.out_dir / "quench_times.svg").is_file()


def test_empty_series_skips_plots(tmp_path):
    rec = ResultRecord("nonlocal-steady")
    assert emit_plots(rec, tmp_path) == []
    assert rec.verdicts["plots"]["status"] == SKIPPED
    assert not list(tmp_path.glob("*.svg"))


def test_solver_error_becomes_fail(tmp_path):
    cfg = load_config("nonlocal-steady", overrides=SMALL + ["params.lambda=100"],
                      out=str(tmp_path))
    rec = run(cfg)
    assert rec.verdicts["error"]["status"] == FAIL
    assert "RootOutOfRange" in rec.verdicts["error"]["detail"]


def test_picard_and_energy_runs(tmp_path):
    for name in ("picard", "energy"):
        rec = run(load_config(name, overrides=SMALL + ["output.plots=false"], out=str(tmp_path)))
        assert rec.ok, (name, rec.failed)


def test_deterministic_outputs(tmp_path):
    blobs = []
    for k in range(2):
        cfg = load_config("quench-sweep", overrides=SMALL, out=str(tmp_path / str(k)))
        run(cfg)
        blobs.append({p.name: p.read_bytes() for p in sorted(cfg.out_dir.iterdir())})
    assert blobs[0] == blobs[1]


def test_cli_list_and_help(capsys):
    assert cli.main(["--list"]) == 0
    out = capsys.readouterr().out
    assert all(name in out for name in EXPERIMENTS)
    with pytest.raises(SystemExit) as exc:
        cli.main(["evolve", "--help"])
    assert exc.value.code == 0
    assert "domain.resolution" in capsys.readouterr().out
    assert cli.main([]) == 2


def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    out = str(tmp_path)
    assert cli.main(["evolve", "--out", out, "--override", "domain.resolution=32",
                     "--override", "params.lambda=0", "--no-plots"]) == 0
    assert cli.main(["nonlocal-steady", "--out", out, "--override", "domain.resolution=32",
                     "--override", "params.lambda=100"]) == 1
    assert cli.main(["evolve", "--override", "domain.bogus=1"]) == 2
    monkeypatch.setenv("MEMS_THREADS", "zero")
    assert cli.main(["evolve", "--out", out]) == 2
    err = capsys.readouterr().err
    assert "config error" in err and "MEMS_THREADS" in err
