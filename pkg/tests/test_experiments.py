import csv
import dataclasses
import json
import math

import numpy as np
import pytest
from scipy import stats

from alelab.errors import BudgetError, DomainError
from alelab.experiments import (
    CONVERGE_COLUMNS,
    STABILITY_COLUMNS,
    SUMMARY_COLUMNS,
    RunConfig,
    arms_from_spec,
    classify,
    cmd_converge,
    cmd_distance,
    cmd_render,
    cmd_simulate,
    cmd_stability,
    gamma_of_eta,
    make_rng,
    workers_from_env,
)

TWO_ARM = [{"angle": 0.0, "length": 0.5}, {"angle": 2.0, "length": 0.25}]


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(l for l in fh if not l.startswith("#")))


def test_gamma_of_eta():
    assert gamma_of_eta(2.0) == 8.0
    assert gamma_of_eta(3.0) == 8.0
    assert gamma_of_eta(1.05) > 100
    assert gamma_of_eta(1.05) == pytest.approx(2 * 3.05 / 0.05)
    for bad in (1.0, 0.5, 0.0):
        with pytest.raises(DomainError):
            gamma_of_eta(bad)


def test_config_schema_is_pinned():
    names = [f.name for f in dataclasses.fields(RunConfig)]
    assert names == ["model", "arms", "eta", "alpha", "capacity", "gamma", "sigma", "horizon", "dt", "seed",
                     "run_index", "micro_capacity", "tolerance", "max_particles", "output_dir", "schema_version"]
    assert CONVERGE_COLUMNS == ["c", "seed", "model", "d_bw", "sup_tip_dev", "sup_weight_dev", "status", "error"]
    assert SUMMARY_COLUMNS[:4] == ["c", "model", "sigma", "median_d_bw"]
    assert STABILITY_COLUMNS == ["eta", "t", "spread"]


def test_config_validation():
    with pytest.raises(DomainError):
        RunConfig("ale", TWO_ARM)  # neither gamma nor sigma
    with pytest.raises(DomainError):
        RunConfig("ale", TWO_ARM, gamma=2, sigma=1e-4)
    with pytest.raises(DomainError):
        RunConfig("dla", TWO_ARM)
    with pytest.raises(DomainError):
        RunConfig("multinomial", [])
    with pytest.raises(DomainError):
        RunConfig.from_dict({"model": "lpm", "arms": TWO_ARM, "colour": "red"})
    with pytest.raises(DomainError):
        RunConfig.from_dict({"model": "lpm", "arms": TWO_ARM, "schema_version": 2})
    with pytest.raises(BudgetError):
        RunConfig("multinomial", TWO_ARM, capacity=1e-4, horizon=100.0)
    cfg = RunConfig("ale", TWO_ARM, gamma="theorem", capacity=0.5)
    assert cfg.sigma_value == pytest.approx(0.5 ** 8)
    assert RunConfig("aux", TWO_ARM, gamma=2, capacity=0.1).sigma_value == pytest.approx(0.01)
    with pytest.warns(UserWarning):
        RunConfig("ale", TWO_ARM, gamma="theorem", capacity=1e-4).sigma_value


def test_arms_spec_forms():
    assert arms_from_spec([(0.0, 0.5)]) == [{"angle": 0.0, "length": 0.5}]
    sym = arms_from_spec({"symmetric": 4, "length": 0.2, "angle": 0.1})
    assert len(sym) == 4 and sym[2]["angle"] == pytest.approx(0.1 + math.pi)


def test_rng_streams():
    a = make_rng(3, 0).random(4)
    assert np.array_equal(a, make_rng(3, 0).random(4))
    assert not np.array_equal(a, make_rng(3, 1).random(4))


def test_workers_env(monkeypatch):
    monkeypatch.delenv("ALELAB_WORKERS", raising=False)
    assert workers_from_env() == 1
    monkeypatch.setenv("ALELAB_WORKERS", "3")
    assert workers_from_env() == 3
    monkeypatch.setenv("ALELAB_WORKERS", "0")
    with pytest.raises(DomainError):
        workers_from_env()


def test_simulate_symmetric_lpm(tmp_path):
    cfg = RunConfig.from_dict({"model": "lpm", "arms": {"symmetric": 3, "length": 0.3}, "horizon": 0.1, "dt": 0.01})
    res = cmd_simulate(cfg, root=tmp_path)
    rows = read_csv(res.files["tips"])
    assert rows[0] == ["n", "t", "arm", "phi", "p", "abs_second_deriv"]
    assert {float(r[4]) for r in rows[1:]} == {1 / 3}
    svg = res.files["svg"].read_text()
    assert svg.count("<path") == 3
    man = json.loads((res.files["config"].parent / "manifest.json").read_text())
    assert man["seed"] == 0 and man["schema_version"] == 1
    assert read_csv(res.files["trajectory"])[0][0] == "t"


def test_simulate_is_reproducible(tmp_path):
    cfg = RunConfig("ale", TWO_ARM, capacity=0.04, gamma=2, horizon=0.2, seed=11)
    a = cmd_simulate(cfg, root=tmp_path / "a", render=False)
    b = cmd_simulate(cfg, root=tmp_path / "b", render=False)
    for key in ("events", "tips", "measure", "metrics", "chain"):
        assert a.files[key].read_bytes() == b.files[key].read_bytes(), key
    assert a.metrics["sigma"] == pytest.approx(0.04 ** 2)
    c = cmd_simulate(cfg.with_(seed=12), root=tmp_path / "c", render=False)
    assert c.files["events"].read_bytes() != a.files["events"].read_bytes()


def test_simulate_hastings_levitov_uniform(tmp_path):
    cfg = RunConfig("ale", [], eta=0.0, sigma=1e-3, capacity=1e-3, horizon=2.0, seed=4)
    res = cmd_simulate(cfg, root=tmp_path, render=False)
    th = np.array([json.loads(l)["theta"] for l in res.files["events"].read_text().splitlines()])
    assert len(th) == 2000
    counts, _ = np.histogram(th, bins=16, range=(-math.pi, math.pi))
    assert stats.chisquare(counts).pvalue > 0.001


def test_render_and_distance(tmp_path):
    base = RunConfig("multinomial", TWO_ARM, capacity=0.05, horizon=0.2)
    a = cmd_simulate(base.with_(seed=1), root=tmp_path)
    b = cmd_simulate(base.with_(seed=2), root=tmp_path)
    lines = cmd_render(a.files["config"].parent, tmp_path / "re.svg", 4, tmp_path / "re.csv")
    assert (tmp_path / "re.svg").read_text().count("<path") == len(lines)
    same = cmd_distance(a.files["measure"], a.files["measure"])
    assert same["d_bw"] < 1e-9
    d = cmd_distance(a.files["measure"], b.files["measure"])
    raw = cmd_distance(a.files["measure"], b.files["measure"], coarse=False)
    assert 0 <= d["d_bw"] <= 2 and d["coarsening_bound"] > 0 and raw["coarsening_bound"] == 0
    assert abs(d["d_bw"] - raw["d_bw"]) <= d["coarsening_bound"] + 1e-9


def test_converge_symmetric_multinomial_pins_tips(tmp_path):
    base = RunConfig.from_dict({"model": "multinomial", "arms": {"symmetric": 2, "length": 0.3}, "horizon": 0.1})
    rep = cmd_converge(base, (0.04, 0.02, 0.01), range(10), models=("multinomial",), lpm_dt=1e-3, root=tmp_path)
    assert len(rep.rows) == 30 and all(r["status"] == "ok" for r in rep.rows)
    assert max(r["sup_tip_dev"] for r in rep.rows) < 1e-8
    rows = read_csv(rep.files["table"])
    assert rows[0] == CONVERGE_COLUMNS and len(rows) == 31
    assert read_csv(rep.files["summary"])[0] == SUMMARY_COLUMNS
    first = rep.files["table"].read_text().splitlines()[0]
    assert first.startswith("# ") and json.loads(first[2:])["gamma"] == 2.0


def test_converge_argument_checks():
    base = RunConfig("multinomial", TWO_ARM)
    with pytest.raises(DomainError):
        cmd_converge(base, (0.04, 0.02), range(10))
    with pytest.raises(DomainError):
        cmd_converge(base, (0.01, 0.02, 0.04), range(10))
    with pytest.raises(DomainError):
        cmd_converge(base, (0.04, 0.02, 0.01), range(5))
    with pytest.raises(BudgetError):
        cmd_converge(base, (0.04, 0.02, 0.01), range(10), particle_budget=100)


def test_converge_records_failures(monkeypatch):
    # a failing cell is recorded with its cause instead of aborting the study
    import alelab.experiments as ex
    from alelab.errors import GeometryError
    from alelab.measures import dirac

    def boom(config):
        raise GeometryError("tip preimage hit a base point")

    monkeypatch.setattr(ex, "run_model", boom)
    ref = ex.Reference(np.array([0.0]), np.zeros((1, 2)), np.full((1, 2), 0.5), dirac(0.0, 0.0, 0.1))
    row = ex._cell((RunConfig("multinomial", TWO_ARM, capacity=0.05, horizon=0.1), ref, (16, 4)))
    assert row["status"] == "failed" and "GeometryError" in row["error"] and math.isnan(row["d_bw"])
    ok = dict(row, status="ok", d_bw=0.5, sup_tip_dev=0.1, sup_weight_dev=0.1, seed=1)
    (summ,) = ex.summarize([row, ok])
    assert summ["n_ok"] == 1 and summ["n_failed"] == 1 and summ["median_d_bw"] == 0.5


def test_stability_zero_perturbation():
    rep = cmd_stability(etas=(2.0, 4.0), eps=0.0, horizon=0.05, dt=1e-2)
    for eta in rep.etas:
        assert np.max(np.abs(rep.spreads[eta])) < 1e-12


def test_stability_outputs(tmp_path):
    rep = cmd_stability(etas=(2.0,), eps=0.02, horizon=0.05, dt=1e-2, root=tmp_path)
    assert read_csv(rep.files["spread"])[0] == STABILITY_COLUMNS
    body = json.loads(rep.files["report"].read_text())
    assert body["eta_c"] == pytest.approx(18 / (3 + 4 * math.log(2)), rel=1e-15)
    assert body["eta_c"] == pytest.approx(3.11815, abs=1e-4)  # quoted value is rounded
    assert rep.spreads[2.0][0] > 0
    with pytest.raises(DomainError):
        cmd_stability(eps=0.5)
    with pytest.raises(BudgetError):
        cmd_stability(horizon=10.0, dt=1e-4, max_steps=1000)


def test_classify():
    assert classify(np.array([0.1, 0.05])) == "contracting"
    assert classify(np.array([0.1, 0.2])) == "expanding"
