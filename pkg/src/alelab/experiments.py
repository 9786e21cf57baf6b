"""Experiment orchestration: configs, seeded sweeps, persistence and the headline studies.

Every run writes into its own timestamped directory with a ``manifest.json``.
Metric files (CSV) hold no timing data, so rerunning a config with the same
seed reproduces them byte for byte; wall-clock times go to the manifest.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import json
import math
import os
import platform
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .ale import AleParams, ale_run, aux_run, write_events_jsonl
from .chain import (
    ArmSpec,
    ConformalChain,
    build_initial,
    chain_from_dict,
    chain_to_dict,
    polylines_to_svg,
    trace_cluster,
    write_polylines_csv,
)
from .errors import AleLabError, BudgetError, DomainError
from .lpm import encode_driving, lpm_run, weight_spread, write_trajectory_csv
from .measures import (
    CylinderMetric,
    coarsen,
    coarsening_bound,
    d_bw,
    encode_ale,
    encode_events,
    read_measure,
    write_measure,
)
from .tips import multinomial_run, write_tip_history

SCHEMA_VERSION = 1
MODELS = ("ale", "aux", "multinomial", "lpm")
ALE_FAMILY = ("ale", "aux")
SIGMA_WARN = 1e-25
DEFAULT_LADDER = (0.04, 0.02, 0.01, 0.005)
DEFAULT_GRID = (256, 64)

CONVERGE_COLUMNS = ["c", "seed", "model", "d_bw", "sup_tip_dev", "sup_weight_dev", "status", "error"]
SUMMARY_COLUMNS = ["c", "model", "sigma", "median_d_bw", "median_sup_tip_dev", "median_sup_weight_dev",
                   "median_tip_plus_weight", "n_ok", "n_failed"]
STABILITY_COLUMNS = ["eta", "t", "spread"]


def gamma_of_eta(eta: float) -> float:
    """Exponent with ``sigma = c**gamma`` sufficient for the ALE to LPM limit."""
    if not eta > 1:
        raise DomainError("gamma(eta) is defined for eta > 1")
    return max(2 * (eta + 2) / (eta - 1), (5 * eta + 10) / (2 * eta), 8.0)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    model: str
    arms: list = field(default_factory=list)  # [{"angle": a, "length": l}, ...]
    eta: float = 2.0
    alpha: float = 0.0
    capacity: float = 0.01
    gamma: float | str | None = None  # number, or "theorem" for gamma_of_eta
    sigma: float | None = None
    horizon: float = 0.5
    dt: float = 1e-3
    seed: int = 0
    run_index: int = 0
    micro_capacity: float = 1e-3
    tolerance: float = 1e-6
    max_particles: int = 200_000
    output_dir: str = "runs"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise DomainError(f"config schema version {self.schema_version} is not supported (expected {SCHEMA_VERSION})")
        if self.model not in MODELS:
            raise DomainError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.model in ALE_FAMILY:
            if (self.gamma is None) == (self.sigma is None):
                raise DomainError("set exactly one of gamma and sigma for ale/aux")
            if isinstance(self.gamma, str) and self.gamma != "theorem":
                raise DomainError("gamma must be a number or 'theorem'")
        if not (0 < self.capacity < 1):
            raise DomainError("capacity must lie in (0, 1)")
        if self.horizon <= 0:
            raise DomainError("horizon must be positive")
        if self.model != "ale" and not self.arms:
            raise DomainError(f"model {self.model} needs at least one arm")
        for a in self.arms:
            if set(a) != {"angle", "length"}:
                raise DomainError("each arm needs exactly 'angle' and 'length'")
        if self.model != "lpm" and self.horizon / self.capacity > self.max_particles:
            raise BudgetError(f"T/c = {self.horizon / self.capacity:.0f} exceeds max_particles = {self.max_particles}")
        if self.model == "lpm" and self.horizon / self.dt * max(1, len(self.arms)) > self.max_particles * 10:
            raise BudgetError("LPM step count exceeds 10 x max_particles")

    @property
    def sigma_value(self) -> float | None:
        if self.model not in ALE_FAMILY:
            return None
        if self.sigma is not None:
            return float(self.sigma)
        g = gamma_of_eta(self.eta) if self.gamma == "theorem" else float(self.gamma)
        s = self.capacity ** g
        if s < SIGMA_WARN:
            warnings.warn(f"sigma = {s:.3e} is below {SIGMA_WARN:g}; the density is not resolvable in double precision")
        return s

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown config keys: {sorted(extra)}")
        d = dict(d)
        d["arms"] = arms_from_spec(d.get("arms", []))
        return cls(**d)

    def with_(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)


def arms_from_spec(spec) -> list:
    """Normalise an arms spec.

    Accepts a list of ``{"angle", "length"}`` objects, a list of pairs, or
    ``{"symmetric": k, "length": l, "angle": a}``.
    """
    if isinstance(spec, dict):
        k = int(spec["symmetric"])
        a0 = float(spec.get("angle", 0.0))
        return [{"angle": a0 + 2 * math.pi * j / k, "length": float(spec["length"])} for j in range(k)]
    out = []
    for a in spec:
        if isinstance(a, dict):
            out.append({"angle": float(a["angle"]), "length": float(a["length"])})
        else:
            out.append({"angle": float(a[0]), "length": float(a[1])})
    return out


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return RunConfig.from_dict(json.load(fh))


def make_rng(seed: int, run_index: int = 0) -> np.random.Generator:
    """Philox stream keyed by ``(seed, run_index)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(run_index)])))


@lru_cache(maxsize=32)
def _initial_cached(arms: tuple, micro: float, tol: float):
    return build_initial([ArmSpec(a, l) for a, l in arms], micro_capacity=micro, tolerance=tol)


def initial_for(config: RunConfig):
    arms = tuple((a["angle"], a["length"]) for a in config.arms)
    return _initial_cached(arms, config.micro_capacity, config.tolerance)


def workers_from_env(default: int = 1) -> int:
    v = os.environ.get("ALELAB_WORKERS")
    if not v:
        return default
    n = int(v)
    if n < 1:
        raise DomainError("ALELAB_WORKERS must be a positive integer")
    return n


def make_run_dir(root, name: str) -> Path:
    stamp = _dt.datetime.now().strftime("%Y%m%dT%H%M%S_%f")
    d = Path(root) / f"{stamp}_{name}"
    d.mkdir(parents=True, exist_ok=False)
    return d


def versions() -> dict:
    import scipy

    return {"alelab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "kernel_backend": kernels.BACKEND}


def write_manifest(run_dir: Path, payload: dict):
    payload = {"schema_version": SCHEMA_VERSION, "versions": versions(), **payload}
    with open(Path(run_dir) / "manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)


# ---------------------------------------------------------------------------
# running one config
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    config: RunConfig
    trajectory: object
    measure: object
    metrics: dict
    files: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    versions: dict = field(default_factory=dict)

    @property
    def chain(self) -> ConformalChain:
        return self.trajectory.chain


def tip_history(traj):
    """``(times, angles, weights, abs_second)`` for any trajectory type."""
    if hasattr(traj, "tip_angles"):
        return traj.times, traj.tip_angles, traj.tip_weights, traj.tip_abs_second
    if hasattr(traj, "abs_second") and hasattr(traj, "choices"):
        return traj.times, traj.angles, traj.weights, traj.abs_second
    return traj.times, traj.angles, traj.weights, np.abs(traj.second)


def driving_measure(traj):
    if hasattr(traj, "capacities"):
        return encode_ale(traj)
    if hasattr(traj, "choices"):
        return encode_events(traj.driving, np.full(len(traj.driving), traj.capacity), traj.horizon)
    return encode_driving(traj)


def run_model(config: RunConfig):
    """Run the model named in ``config``; returns the trajectory."""
    initial = initial_for(config)
    if config.model == "lpm":
        return lpm_run(initial, config.eta, config.dt, config.horizon, max_events=config.max_particles * 10)
    rng = make_rng(config.seed, config.run_index)
    if config.model == "multinomial":
        return multinomial_run(initial, config.eta, config.capacity, config.horizon, rng, max_events=config.max_particles)
    params = AleParams(config.eta, config.sigma_value, config.capacity, config.horizon, config.alpha, config.max_particles)
    run = ale_run if config.model == "ale" else aux_run
    return run(initial, params, rng)


def _summary_metrics(config: RunConfig, traj) -> dict:
    _, angles, weights, abs2 = tip_history(traj)
    m = {"model": config.model, "seed": config.seed, "run_index": config.run_index, "eta": config.eta,
         "capacity": config.capacity, "sigma": config.sigma_value, "horizon": config.horizon,
         "n_events": len(traj.chain), "cumulative_capacity": traj.chain.cumulative_capacity}
    if angles.size and not np.isnan(angles[-1]).all():
        m["final_tip_angles"] = [float(x) for x in angles[-1]]
        m["final_weights"] = [float(x) for x in weights[-1]]
    if hasattr(traj, "sampler_violations"):
        m["sampler_violations"] = int(traj.sampler_violations)
    return m


def _write_events(path, config: RunConfig, traj):
    if hasattr(traj, "event_records"):
        write_events_jsonl(path, traj)
        return
    with open(path, "w") as fh:
        if hasattr(traj, "choices"):
            for n, (th, j) in enumerate(zip(traj.driving, traj.choices)):
                rec = {"n": n + 1, "theta": float(th), "capacity": traj.capacity, "nearest_tip": int(j),
                       "delta": 0.0, "z_estimate": None}
                fh.write(json.dumps(rec) + "\n")
        else:
            for n, (th, c) in enumerate(zip(traj.chain.event_angles, traj.chain.event_capacities)):
                rec = {"n": n + 1, "theta": float(th), "capacity": float(c), "nearest_tip": None,
                       "delta": 0.0, "z_estimate": None}
                fh.write(json.dumps(rec) + "\n")


def render_chain(chain: ConformalChain, svg_path, csv_path=None, points_per_particle: int = 16, title: str = ""):
    lines = trace_cluster(chain, points_per_particle)
    Path(svg_path).write_text(polylines_to_svg(lines, title=title))
    if csv_path is not None:
        write_polylines_csv(csv_path, lines)
    return lines


def cmd_simulate(config: RunConfig, root=None, render: bool = True) -> RunResult:
    """Run one model and persist events, tip history, measure and an SVG rendering."""
    t0 = time.perf_counter()
    try:
        traj = run_model(config)
    except AleLabError as e:
        raise type(e)(f"[model={config.model} seed={config.seed} c={config.capacity}] {e}") from e
    measure = driving_measure(traj)
    metrics = _summary_metrics(config, traj)
    wall = time.perf_counter() - t0
    res = RunResult(config, traj, measure, metrics, wall_clock=wall, versions=versions())
    run_dir = make_run_dir(root or config.output_dir, f"simulate_{config.model}_s{config.seed}")
    files = {
        "config": run_dir / "config.json",
        "events": run_dir / "events.jsonl",
        "tips": run_dir / "tips.csv",
        "measure": run_dir / "measure.csv",
        "metrics": run_dir / "metrics.json",
        "chain": run_dir / "chain.json",
    }
    files["config"].write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    _write_events(files["events"], config, traj)
    write_tip_history(files["tips"], *tip_history(traj))
    if config.model == "lpm":
        files["trajectory"] = run_dir / "trajectory.csv"
        write_trajectory_csv(files["trajectory"], traj)
    write_measure(files["measure"], measure, provenance={"model": config.model, "seed": config.seed,
                                                        "sigma": config.sigma_value})
    files["metrics"].write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    files["chain"].write_text(json.dumps(chain_to_dict(traj.chain)) + "\n")
    if render:
        files["svg"] = run_dir / "cluster.svg"
        files["polylines"] = run_dir / "cluster.csv"
        render_chain(traj.chain, files["svg"], files["polylines"], title=f"{config.model} seed {config.seed}")
    write_manifest(run_dir, {"command": "simulate", "config": config.to_dict(), "seed": config.seed,
                             "wall_clock_s": wall, "files": {k: v.name for k, v in files.items()}})
    res.files = files
    return res


def cmd_render(source, out_svg, points_per_particle: int = 16, csv_path=None):
    """Re-render a cluster from a run directory or a ``chain.json`` file."""
    p = Path(source)
    if p.is_dir():
        p = p / "chain.json"
    chain = chain_from_dict(json.loads(p.read_text()))
    return render_chain(chain, out_svg, csv_path, points_per_particle)


def cmd_distance(path_a, path_b, grid=DEFAULT_GRID, coarse: bool = True) -> dict:
    """d_BW between two measure files written by :func:`write_measure`."""
    mu, ha = read_measure(path_a)
    nu, hb = read_measure(path_b)
    if ha["time_scale"] != hb["time_scale"]:
        raise DomainError("measures were written with different time scales")
    if abs(mu.horizon - nu.horizon) > 1e-12:
        raise DomainError("measures have different horizons")
    metric = CylinderMetric(ha["time_scale"])
    bound = 0.0
    if coarse:
        mu, nu = coarsen(mu, *grid), coarsen(nu, *grid)
        bound = 2 * coarsening_bound(*grid, mu.horizon, metric)
    r = d_bw(mu, nu, metric)
    return {"d_bw": r.value, "method": r.method, "support": r.support, "coarsening_bound": bound,
            "grid": list(grid) if coarse else None, "time_scale": metric.time_scale}


# ---------------------------------------------------------------------------
# convergence study
# ---------------------------------------------------------------------------


def deviations(traj, ref_times, ref_angles, ref_weights):
    """``sup_t sum_j |e^{i phi} - e^{i phi_ref}|`` and ``sup_t sum_j |p - p_ref|`` on the reference grid."""
    _, angles, weights, _ = tip_history(traj)
    idx = traj.state_index_at(ref_times)
    a, w = angles[idx], weights[idx]
    tip = np.max(np.sum(np.abs(np.exp(1j * a) - np.exp(1j * ref_angles)), axis=1))
    wt = np.max(np.sum(np.abs(w - ref_weights), axis=1))
    return float(tip), float(wt)


@dataclass
class Reference:
    times: np.ndarray
    angles: np.ndarray
    weights: np.ndarray
    measure: object  # coarsened LPM driving measure


def lpm_reference(config: RunConfig, dt: float, grid=DEFAULT_GRID) -> Reference:
    traj = lpm_run(initial_for(config), config.eta, dt, config.horizon, max_events=config.max_particles * 100)
    return Reference(traj.times, traj.angles, traj.weights, coarsen(encode_driving(traj), *grid))


def _cell(args):
    config, ref, grid = args
    row = {"c": config.capacity, "seed": config.seed, "model": config.model, "d_bw": math.nan,
           "sup_tip_dev": math.nan, "sup_weight_dev": math.nan, "status": "ok", "error": ""}
    try:
        traj = run_model(config)
        row["sup_tip_dev"], row["sup_weight_dev"] = deviations(traj, ref.times, ref.angles, ref.weights)
        row["d_bw"] = d_bw(coarsen(driving_measure(traj), *grid), ref.measure).value
    except (AleLabError, ArithmeticError, ValueError) as e:
        row["status"] = "failed"
        row["error"] = f"{type(e).__name__}: {e}"
    return row


def _median(xs):
    xs = [x for x in xs if not math.isnan(x)]
    return float(np.median(xs)) if xs else math.nan


def summarize(rows, sigmas=None) -> list:
    out = []
    keys = sorted({(r["model"], r["c"]) for r in rows}, key=lambda k: (k[0], -k[1]))
    for model, c in keys:
        cell = [r for r in rows if r["model"] == model and r["c"] == c]
        ok = [r for r in cell if r["status"] == "ok"]
        out.append({
            "c": c, "model": model, "sigma": (sigmas or {}).get((model, c), ""),
            "median_d_bw": _median([r["d_bw"] for r in ok]),
            "median_sup_tip_dev": _median([r["sup_tip_dev"] for r in ok]),
            "median_sup_weight_dev": _median([r["sup_weight_dev"] for r in ok]),
            "median_tip_plus_weight": _median([r["sup_tip_dev"] + r["sup_weight_dev"] for r in ok]),
            "n_ok": len(ok), "n_failed": len(cell) - len(ok),
        })
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _write_rows(path, columns, rows, header_comment=None):
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write("# " + json.dumps(header_comment, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


@dataclass
class ConvergenceReport:
    rows: list
    summary: list
    coarsening_bound: float
    files: dict = field(default_factory=dict)

    def medians(self, model: str, key: str = "median_d_bw") -> list:
        return [s[key] for s in self.summary if s["model"] == model]


def cmd_converge(base: RunConfig, ladder=DEFAULT_LADDER, seeds=range(20), models=("ale", "multinomial"),
                 lpm_dt: float = 1e-4, grid=DEFAULT_GRID, root=None, workers: int | None = None,
                 particle_budget: int = 2_000_000, reference: Reference | None = None) -> ConvergenceReport:
    """Run the LPM reference once, then every ``(c, seed, model)`` cell against it."""
    ladder = [float(c) for c in ladder]
    seeds = list(seeds)
    if len(ladder) < 3 or any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise DomainError("ladder needs at least 3 strictly decreasing capacities")
    if len(seeds) < 10:
        raise DomainError("convergence studies need at least 10 seeds")
    for m in models:
        if m not in ("ale", "aux", "multinomial"):
            raise DomainError(f"cannot run model {m!r} in a convergence study")
    total = sum(math.ceil(base.horizon / c) for c in ladder) * len(seeds) * len(models)
    if total > particle_budget:
        raise BudgetError(f"study needs {total} particles, budget is {particle_budget}")
    gamma = base.gamma if base.gamma is not None or base.sigma is not None else 2.0
    t0 = time.perf_counter()
    if reference is None:
        reference = lpm_reference(base.with_(model="lpm", gamma=None, sigma=None), lpm_dt, grid)
    t_ref = time.perf_counter() - t0
    cells = []
    sigmas = {}
    for m in models:
        for c in ladder:
            kw = {"model": m, "capacity": c}
            if m in ALE_FAMILY:
                kw.update(gamma=None if base.sigma is not None else gamma, sigma=base.sigma)
            else:
                kw.update(gamma=None, sigma=None)
            for s in seeds:
                cfg = base.with_(seed=s, run_index=0, **kw)
                sigmas[(m, c)] = cfg.sigma_value if m in ALE_FAMILY else ""
                cells.append((cfg, reference, grid))
    workers = workers or workers_from_env()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_cell, cells))
    else:
        rows = [_cell(a) for a in cells]
    summary = summarize(rows, sigmas)
    metric = CylinderMetric()
    bound = 2 * coarsening_bound(*grid, base.horizon, metric)
    rep = ConvergenceReport(rows, summary, bound)
    if root is not None:
        run_dir = make_run_dir(root, "converge")
        header = {"schema_version": SCHEMA_VERSION, "gamma": gamma, "lpm_dt": lpm_dt, "grid": list(grid),
                  "coarsening_bound": bound, "time_scale": metric.time_scale,
                  "note": "sigma = c**gamma with gamma below the theorem's gamma(eta); empirical check"}
        rep.files = {"table": run_dir / "convergence.csv", "summary": run_dir / "summary.csv"}
        _write_rows(rep.files["table"], CONVERGE_COLUMNS, rows, header)
        _write_rows(rep.files["summary"], SUMMARY_COLUMNS, summary, header)
        write_manifest(run_dir, {"command": "converge", "base_config": base.to_dict(), "ladder": ladder,
                                 "seeds": seeds, "models": list(models), "lpm_dt": lpm_dt, "workers": workers,
                                 "reference_wall_clock_s": t_ref,
                                 "wall_clock_s": time.perf_counter() - t0,
                                 "n_failed": sum(r["status"] != "ok" for r in rows),
                                 "files": {k: v.name for k, v in rep.files.items()}})
    return rep


# ---------------------------------------------------------------------------
# three-arm stability
# ---------------------------------------------------------------------------

STABILITY_LENGTH = 0.2


@dataclass
class StabilityReport:
    etas: list
    times: np.ndarray
    spreads: dict  # eta -> spread trajectory
    classification: dict  # eta -> "contracting" | "expanding"
    late_slope: dict  # eta -> d log(spread)/dt over the last quarter
    files: dict = field(default_factory=dict)


def perturbed_symmetric(k: int, length: float, eps: float, angle: float = 0.0, micro: float | None = None):
    """``k`` equally spaced arms of length ``length``, arm 0 stretched by ``1 + eps``."""
    arms = [ArmSpec(angle + 2 * math.pi * j / k, length * (1 + eps) if j == 0 else length) for j in range(k)]
    micro = micro if micro is not None else min(1e-4, length * length / 100)
    return build_initial(arms, micro_capacity=micro, tolerance=1e-8)


def classify(spread: np.ndarray) -> str:
    return "contracting" if spread[-1] < spread[0] else "expanding"


def cmd_stability(etas=(2.0, 4.0), eps: float = 0.02, horizon: float = 1.0, k: int = 3,
                  length: float = STABILITY_LENGTH, dt: float = 1e-3, root=None,
                  max_steps: int = 1_000_000) -> StabilityReport:
    """Perturb one arm of a symmetric ``k``-arm start and follow the LPM weight spread."""
    if not (0 <= eps < 0.1):
        raise DomainError("eps must lie in [0, 0.1)")
    if horizon / dt * k > max_steps:
        raise BudgetError(f"stability run needs {horizon / dt * k:.0f} micro steps, budget is {max_steps}")
    if eps == 0:
        initial = build_initial([ArmSpec(2 * math.pi * j / k, length) for j in range(k)])
    else:
        initial = perturbed_symmetric(k, length, eps)
    spreads, cls, slope = {}, {}, {}
    times = None
    for eta in etas:
        traj = lpm_run(initial, eta, dt, horizon)
        times = traj.times
        sp = weight_spread(traj)
        spreads[eta] = sp
        cls[eta] = classify(sp)
        q = len(sp) * 3 // 4
        with np.errstate(divide="ignore"):
            ls = np.log(sp[q:])
        slope[eta] = float(np.polyfit(times[q:], ls, 1)[0]) if np.all(np.isfinite(ls)) else 0.0
    rep = StabilityReport(list(etas), times, spreads, cls, slope)
    if root is not None:
        run_dir = make_run_dir(root, "stability")
        rows = [{"eta": eta, "t": float(t), "spread": float(s)} for eta in etas for t, s in zip(times, spreads[eta])]
        rep.files = {"spread": run_dir / "spread.csv", "report": run_dir / "report.json"}
        _write_rows(rep.files["spread"], STABILITY_COLUMNS, rows)
        body = {"k": k, "length": length, "eps": eps, "horizon": horizon, "dt": dt,
                "eta_c": 18 / (3 + 4 * math.log(2)),
                "results": [{"eta": eta, "initial_spread": float(spreads[eta][0]), "final_spread": float(spreads[eta][-1]),
                             "classification": cls[eta], "late_log_slope": slope[eta]} for eta in etas]}
        rep.files["report"].write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
        write_manifest(run_dir, {"command": "stability", **body, "files": {k_: v.name for k_, v in rep.files.items()}})
    return rep


__all__ = [
    "SCHEMA_VERSION",
    "RunConfig",
    "RunResult",
    "ConvergenceReport",
    "StabilityReport",
    "Reference",
    "gamma_of_eta",
    "arms_from_spec",
    "load_config",
    "make_rng",
    "initial_for",
    "run_model",
    "cmd_simulate",
    "cmd_converge",
    "cmd_stability",
    "cmd_distance",
    "cmd_render",
    "deviations",
    "lpm_reference",
    "summarize",
    "classify",
    "perturbed_symmetric",
    "workers_from_env",
]
