import csv
import json
import xml.etree.ElementTree as ET

import pytest

from gpjet import cli


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def test_fig5b_rerun_is_byte_identical(tmp_path):
    c1, a = run(tmp_path, "fig5b", "--seed", "7", name="a")
    c2, b = run(tmp_path, "fig5b", "--seed", "7", name="b")
    assert c1 == c2 == 0
    assert (a / "result.json").read_bytes() == (b / "result.json").read_bytes()
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    res = json.loads((a / "result.json").read_text())
    assert res["n_obs"] == 10 and res["rmse"] > 0


def test_fig9_result_fields(tmp_path):
    code, out = run(tmp_path, "fig9", "--seed", "3", "--plot")
    assert code == 0
    res = json.loads((out / "result.json").read_text())
    assert {"best_ratio", "best_lag", "regret"} <= set(res)
    assert len(res["regret"]) <= 3 and res["n_successful"] <= 3
    assert res["best_ratio"] >= 1.0
    ET.fromstring((out / "plot.svg").read_text())
    rows = list(csv.reader((out / "trace.csv").open()))
    assert rows[0] == ["model", "iter", "x", "y", "rmse", "mciw", "min_regret"]


def test_fig7_pairs_share_initial_points(tmp_path):
    code, out = run(tmp_path, "fig7", "--seed", "1")
    assert code == 0
    res = json.loads((out / "result.json").read_text())
    assert res["gp"]["initial_x"] == res["mf"]["initial_x"]
    assert len(res["gp"]["x"]) == len(res["mf"]["x"]) == 6


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 2, "n_obs": 6, "machine": {"sigma_R": 0.0}}))
    code, out = run(tmp_path, "fig5a", "--config", str(cfg), "--seed", "4")
    assert code == 0
    res = json.loads((out / "result.json").read_text())
    assert res["seed"] == 4 and res["n_obs"] == 6


@pytest.mark.parametrize("n", [3, 4])
def test_fig5c_variants(tmp_path, n):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_obs": n}))
    code, out = run(tmp_path, "fig5c", "--config", str(cfg))
    assert code == 0
    assert json.loads((out / "result.json").read_text())["n_obs"] == n


def test_fig5d_records_unstable_settings(tmp_path):
    code, out = run(tmp_path, "fig5d")
    res = json.loads((out / "result.json").read_text())
    assert code == 0 and res["n_obs"] == 8 and len(res["unstable_settings"]) == 4


def test_unknown_experiment(tmp_path, capsys):
    code, _ = run(tmp_path, "fig42")
    assert code == 2
    assert "unknown experiment" in capsys.readouterr().err


@pytest.mark.parametrize("payload", [{"bogus": 1}, {"machine": {"sigma_R": -1}},
                                     {"groups": {"Ca": -3}}, {"seed": -1}, [1, 2]])
def test_config_errors(tmp_path, payload):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(payload))
    code, _ = run(tmp_path, "fig5a", "--config", str(cfg))
    assert code == 2


def test_missing_config_file(tmp_path):
    assert run(tmp_path, "fig5a", "--config", str(tmp_path / "nope.json"))[0] == 2


def test_runtime_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"init": [0.5]}))
    code, _ = run(tmp_path, "fig9", "--config", str(cfg))
    assert code == 3
    assert "UnstableRegime" in capsys.readouterr().err


def test_seed_sweep(tmp_path):
    code, out = run(tmp_path, "fig5a", "--seeds", "0..2")
    assert code == 0
    seeds = [json.loads((out / f"seed_{s}" / "result.json").read_text())["seed"]
             for s in range(3)]
    assert seeds == [0, 1, 2]
    assert run(tmp_path, "fig5a", "--seeds", "3..1", name="bad")[0] == 2


def test_metrology_bench(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_frames": 12, "hd_frames": 0}))
    code, out = run(tmp_path, "metrology-bench", "--config", str(cfg))
    assert code == 0
    res = json.loads((out / "result.json").read_text())
    assert res["within_one_pixel"]
    timing = json.loads((out / "timing.json").read_text())
    assert set(timing) >= {"sequential", "pipelined", "parallel"}
