import json
import os

import numpy as np
import pytest

from sdphull.cli import (EXIT_CONFIG, EXIT_OK, main)

from gen import random_miqcqp


def test_count_command(capsys):
    assert main(["count", "--n", "10", "--m", "2", "--k", "2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "full: 444" in out and "compact: 116" in out


def test_count_rejects_negative():
    assert main(["count", "--n", "-1", "--m", "0", "--k", "2"]) == EXIT_CONFIG


def test_invalid_tier_is_an_argparse_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--demo", "illustrative", "--tier", "sdp",
              "--out", str(tmp_path)])
    assert exc.value.code == 2
    assert not list(tmp_path.iterdir())


def test_solve_needs_exactly_one_instance_source(tmp_path, capsys):
    assert main(["solve", "--tier", "mibsdp",
                 "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "exactly one" in capsys.readouterr().err
    assert not list(tmp_path.iterdir())


def test_missing_input_file(tmp_path):
    assert main(["solve", "--input", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path)]) == EXIT_CONFIG
    assert not list(tmp_path.iterdir())


def test_solve_illustrative_writes_reports(tmp_path, capsys):
    code = main(["solve", "--demo", "illustrative", "--tier", "ch-miesdp",
                 "--objective", "x+y", "--out", str(tmp_path)])
    assert code == EXIT_OK
    names = {p.name for p in tmp_path.iterdir()}
    assert {"report.json", "metadata.json", "nodes.csv"} <= names
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["result"]["status"] == "Optimal"
    assert rep["result"]["objective"] == pytest.approx(-1.0, abs=1e-6)
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert "wall_time_s" in meta and "started_utc" in meta


def test_solve_report_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["solve", "--demo", "illustrative", "--tier", "miesdp",
                     "--out", str(out)]) == EXIT_OK
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "nodes.csv").read_bytes() == (b / "nodes.csv").read_bytes()


def test_solve_instance_file_and_env_out(tmp_path, monkeypatch):
    rng = np.random.default_rng(0)
    prob = random_miqcqp(rng, n=3, nbin=1, mcons=1)
    inst = tmp_path / "inst.json"
    prob.save(inst)
    outdir = tmp_path / "fromenv"
    monkeypatch.setenv("SDPHULL_OUT", str(outdir))
    assert main(["solve", "--input", str(inst), "--tier", "mibsdp"]) == EXIT_OK
    assert (outdir / "report.json").exists()


def test_config_file_fills_flags_and_cli_overrides(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"demo": "illustrative", "tier": "mibsdp",
                               "objective": "x+y", "out": str(tmp_path / "o1")}))
    assert main(["solve", "--config", str(cfg)]) == EXIT_OK
    rep = json.loads((tmp_path / "o1" / "report.json").read_text())
    assert rep["config"]["tier"] == "mibsdp"

    # an explicit flag wins over the file value
    assert main(["solve", "--config", str(cfg), "--tier", "miesdp",
                 "--out", str(tmp_path / "o2")]) == EXIT_OK
    rep2 = json.loads((tmp_path / "o2" / "report.json").read_text())
    assert rep2["config"]["tier"] == "miesdp"


def test_config_file_unknown_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"demo": "illustrative", "solver": "magic"}))
    assert main(["solve", "--config", str(cfg),
                 "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_strategy_string(tmp_path):
    assert main(["solve", "--demo", "illustrative", "--strategy", "widest",
                 "--out", str(tmp_path)]) == EXIT_CONFIG
    assert not list(tmp_path.iterdir())


def test_compare_writes_table_plot_and_figure(tmp_path):
    code = main(["compare", "--demo", "illustrative", "--objective", "x+y",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    names = {p.name for p in tmp_path.iterdir()}
    assert {"comparison.csv", "comparison_plot.csv", "comparison.png",
            "report.json", "metadata.json"} <= names
    lines = (tmp_path / "comparison.csv").read_text().splitlines()
    assert lines[0] == "tier,status,oov,error_max,error_rank,nodes,runtime_pu"
    assert len(lines) == 4
    # per-unit runtime of the basic tier is 1 by construction
    assert float(lines[1].split(",")[-1]) == 1.0
    assert (tmp_path / "comparison.png").stat().st_size > 1000
