import json
import subprocess
import sys
from pathlib import Path

from alelab.cli import main

TWO_ARM = [{"angle": 0.0, "length": 0.5}, {"angle": 2.0, "length": 0.25}]


def write_config(tmp_path, **kw):
    cfg = {"model": "multinomial", "arms": TWO_ARM, "capacity": 0.05, "horizon": 0.2, "seed": 1, **kw}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def last_json(out):
    return json.loads(out.strip().splitlines()[-1])


def test_simulate_seed_override_render_distance(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["simulate", str(cfg), "--out", str(tmp_path / "runs")]) == 0
    a = last_json(capsys.readouterr().out)
    assert a["seed"] == 1
    assert main(["simulate", str(cfg), "--seed", "7", "--out", str(tmp_path / "runs"), "--no-render"]) == 0
    b = last_json(capsys.readouterr().out)
    assert b["seed"] == 7
    assert not (Path(b["run_dir"]) / "cluster.svg").exists()
    cfg_echo = json.loads((Path(b["run_dir"]) / "config.json").read_text())
    assert cfg_echo["seed"] == 7

    ma, mb = Path(a["run_dir"]) / "measure.csv", Path(b["run_dir"]) / "measure.csv"
    assert main(["distance", str(ma), str(mb)]) == 0
    d = last_json(capsys.readouterr().out)
    assert 0 <= d["d_bw"] <= 2 and d["grid"] == [256, 64]

    svg = tmp_path / "again.svg"
    assert main(["render", a["run_dir"], "--out", str(svg), "--points", "4"]) == 0
    assert svg.read_text().startswith("<svg")


def test_stability_command(tmp_path, capsys):
    rc = main(["stability", "--etas", "2,4", "--horizon", "0.05", "--dt", "0.01", "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "eta=2 " in out and "eta=4 " in out and "report" in out


def test_converge_command(tmp_path, capsys):
    cfg = write_config(tmp_path, arms={"symmetric": 2, "length": 0.3}, horizon=0.1)
    rc = main(["converge", str(cfg), "--ladder", "0.04,0.02,0.01", "--seeds", "10", "--models", "multinomial",
               "--lpm-dt", "1e-3", "--out", str(tmp_path / "conv")])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.count("multinomial") == 3 and "coarsening bound" in out


def test_errors_return_2(tmp_path, capsys):
    assert main(["simulate", str(tmp_path / "missing.json")]) == 2
    bad = write_config(tmp_path, model="dla")
    assert main(["simulate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "model must be one of" in err
    cfg = write_config(tmp_path)
    assert main(["converge", str(cfg), "--ladder", "0.04,0.02", "--out", str(tmp_path)]) == 2
    assert main(["stability", "--eps", "0.5", "--out", str(tmp_path)]) == 2


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "alelab.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("simulate", "converge", "stability", "distance", "render"):
        assert cmd in r.stdout
