"""Benchmark runner: solver comparison tables, scalar studies and quantum traces.

Scenario file (JSON)::

    {
      "model": "wscc9",            # bundled name, or a model file path
      "horizon": 20.0,
      "machine": "2",              # bus id of the machine used for errors
      "disturbance": {"type": "fault", "bus": "7", "t_on": 1.0,
                      "duration": 0.08, "trip_line": "L5-7"}
    }

``disturbance.type`` is ``fault``, ``load-loss`` (either ``fraction`` of all
load, or ``buses`` + ``dp`` + ``dq``) or ``none``.

Matrix file (JSON)::

    {
      "scenario": "wscc9_fault.json",   # path or inline object
      "reference": {"kind": "fixed", "dt": 0.001},
      "configs": [{"name": "qss-ab2 0.24", "kind": "qss-ab2", "dq": 0.24}, ...],
      "repetitions": 3
    }

Each config accepts the :class:`~dualqss.trapezoid.StepSource` fields.
Relative paths resolve against the file that names them.
"""
import csv
import json
import logging
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import EmptySeries, NotAdaptive
from .powersys import build_model, make_fault_scenario, make_load_loss_scenario, total_load_loss
from .powersys.metrics import avg_error
from .powersys.model import DATASETS
from .powersys.scenarios import ScenarioSpec
from .scalar import (ScalarQssConfig, ab2_scalar_simulate, mean_timing_error, qss1_simulate,
                     timing_error_series, write_trace_csv, exact_steps)
from .trapezoid import FIXED, StepSource, Trajectory

log = logging.getLogger(__name__)

REFERENCE_NAME = "reference"
FAILED = "FAILED"

_SOURCE_FIELDS = {f.name for f in fields(StepSource)}


def config_path(name: str) -> Path:
    """Path of a bundled scenario or matrix file."""
    return Path(str(resources.files("dualqss") / "configs" / name))


def source_from_dict(d: dict) -> StepSource:
    kw = {k: v for k, v in d.items() if k in _SOURCE_FIELDS}
    if "weights" in kw and kw["weights"] is not None:
        kw["weights"] = tuple(kw["weights"])
    unknown = set(d) - _SOURCE_FIELDS - {"name"}
    if unknown:
        raise ValueError(f"unknown step-source keys: {sorted(unknown)}")
    return StepSource(**kw)


def scenario_from_dict(d: dict, base: Path = Path(".")) -> ScenarioSpec:
    ref = d.get("model", "wscc9")
    model = build_model(ref if ref in DATASETS else str((base / ref).resolve()))
    horizon = float(d.get("horizon", 20.0))
    machine = d.get("machine", 0)
    dist = d.get("disturbance", {"type": "none"})
    kind = dist.get("type", "none")
    if kind == "fault":
        spec = make_fault_scenario(model, dist["bus"], dist.get("t_on", 1.0), dist.get("duration", 0.08),
                                   dist.get("trip_line"), horizon, machine)
    elif kind == "load-loss":
        if "fraction" in dist:
            spec = total_load_loss(model, dist["fraction"], dist.get("t_on", 1.0), horizon, machine)
        else:
            spec = make_load_loss_scenario(model, dist["buses"], dist["dp"], dist.get("dq", 0.0),
                                           dist.get("t_on", 1.0), horizon, machine)
    elif kind == "none":
        spec = ScenarioSpec(model, horizon, [], machine, name="equilibrium")
    else:
        raise ValueError(f"unknown disturbance type {kind!r}")
    spec.name = d.get("name", spec.name)
    return spec


def load_scenario(path) -> ScenarioSpec:
    path = Path(path)
    return scenario_from_dict(json.loads(path.read_text()), path.parent)


@dataclass
class BenchmarkMatrix:
    scenario: ScenarioSpec
    configs: list                       # (name, StepSource) pairs
    reference: StepSource = field(default_factory=lambda: StepSource(FIXED, dt=0.001))
    repetitions: int = 3
    out: Path = Path("bench-out")
    workers: int = 1

    def __post_init__(self):
        if self.repetitions < 3:
            raise ValueError("need at least 3 timing repetitions")
        self.out = Path(self.out)

    @classmethod
    def from_file(cls, path, out=None, repetitions=None) -> "BenchmarkMatrix":
        path = Path(path)
        d = json.loads(path.read_text())
        sc = d["scenario"]
        scenario = load_scenario(path.parent / sc) if isinstance(sc, str) else scenario_from_dict(sc, path.parent)
        configs = [(c.get("name") or source_from_dict(c).name, source_from_dict(c)) for c in d.get("configs", [])]
        reference = source_from_dict(d.get("reference", {"kind": FIXED, "dt": 0.001}))
        return cls(scenario, configs, reference,
                   repetitions if repetitions is not None else d.get("repetitions", 3),
                   Path(out) if out is not None else path.parent / d.get("out", "bench-out"),
                   d.get("workers", 1))


def _timed_runs(spec: ScenarioSpec, source: StepSource, reps: int):
    spec.run(source)  # warm-up, discarded
    times = []
    traj = None
    for _ in range(reps):
        t0 = time.perf_counter()
        tr = spec.run(source)
        times.append(time.perf_counter() - t0)
        traj = traj or tr
    return traj, 1e3 * statistics.median(times)


def _safe_name(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def run_matrix(matrix: BenchmarkMatrix) -> list:
    """Run reference and every configuration; write CSVs and an aligned table.

    Returns one dict per row with keys ``config``, ``wall_ms_median``,
    ``steps``, ``avg_error`` and ``status``.
    """
    out = matrix.out
    (out / "trajectories").mkdir(parents=True, exist_ok=True)
    spec = matrix.scenario
    speed = spec.speed_index

    ref, ref_ms = _timed_runs(spec, matrix.reference, matrix.repetitions)
    ref_file = out / "trajectories" / f"{REFERENCE_NAME}.csv"
    ref.write_csv(ref_file)
    rows = [dict(config=REFERENCE_NAME, wall_ms_median=ref_ms, steps=ref.steps,
                 avg_error=None, status="ok", trajectory=ref_file.name)]

    def one(item):
        name, source = item
        try:
            traj, ms = _timed_runs(spec, source, matrix.repetitions)
        except Exception as exc:  # a failed row must not abort the others
            log.warning("config %s failed: %s", name, exc)
            return dict(config=name, wall_ms_median=None, steps=None, avg_error=None,
                        status=FAILED, error=str(exc)), None
        return dict(config=name, wall_ms_median=ms, steps=traj.steps,
                    avg_error=avg_error(traj, ref, speed), status="ok"), traj

    if matrix.workers > 1:
        with ThreadPoolExecutor(matrix.workers) as pool:
            results = list(pool.map(one, matrix.configs))
    else:
        results = [one(item) for item in matrix.configs]

    for row, traj in results:
        if traj is not None:
            fname = f"{_safe_name(row['config'])}.csv"
            traj.write_csv(out / "trajectories" / fname)
            row["trajectory"] = fname
        rows.append(row)

    write_results_csv(rows, out / "results.csv")
    (out / "table.txt").write_text(format_table(rows))
    (out / "manifest.json").write_text(json.dumps({
        "scenario": spec.name, "speed_index": speed,
        "reference": ref_file.name,
        "rows": [{"config": r["config"], "trajectory": r.get("trajectory")} for r in rows],
    }, indent=2))
    return rows


def _fmt(v, spec):
    return "" if v is None else format(v, spec)


def write_results_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["config", "wall_ms_median", "steps", "avg_error"])
        for r in rows:
            if r["status"] == FAILED:
                w.writerow([r["config"], FAILED, FAILED, FAILED])
            else:
                w.writerow([r["config"], _fmt(r["wall_ms_median"], ".3f"), r["steps"],
                            _fmt(r["avg_error"], ".6e")])


def format_table(rows) -> str:
    head = ("config", "wall [ms]", "steps", "avg error")
    body = []
    for r in rows:
        if r["status"] == FAILED:
            body.append((r["config"], FAILED, FAILED, FAILED))
        else:
            body.append((r["config"], _fmt(r["wall_ms_median"], ".1f"), str(r["steps"]),
                         _fmt(r["avg_error"], ".3e")))
    widths = [max(len(x[i]) for x in [head] + body) for i in range(4)]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(x, widths)))
             for x in [head] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def table_from_trajectories(out_dir) -> list:
    """Recompute step counts and errors from the persisted trajectories."""
    out_dir = Path(out_dir)
    man = json.loads((out_dir / "manifest.json").read_text())
    ref = Trajectory.read_csv(out_dir / "trajectories" / man["reference"])
    rows = []
    for r in man["rows"]:
        if r["trajectory"] is None:
            rows.append(dict(config=r["config"], steps=None, avg_error=None, status=FAILED))
            continue
        tr = Trajectory.read_csv(out_dir / "trajectories" / r["trajectory"])
        err = None if r["trajectory"] == man["reference"] else avg_error(tr, ref, man["speed_index"])
        rows.append(dict(config=r["config"], steps=tr.steps, avg_error=err, status="ok"))
    return rows


# -- scalar test-equation studies -----------------------------------------

SCALAR_METHODS = {"qss1": qss1_simulate, "ab2": ab2_scalar_simulate}


def run_scalar_study(dqs, methods=("qss1", "ab2"), out=None, lam=-0.6, x0=0.1, horizon=20.0):
    """Simulate ``x' = lam x`` for every quantum and method.

    Writes, per run, the trace CSV and a timing-error CSV, plus the exact
    solution sampled every millisecond. Returns a summary dict keyed by
    ``(dq, method)``.
    """
    out = Path(out) if out is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    grid = np.linspace(0.0, horizon, int(round(horizon * 1000)) + 1)
    exact = x0 * np.exp(lam * grid)
    if out is not None:
        np.savetxt(out / "exact.csv", np.column_stack([grid, exact]), delimiter=",",
                   header="t,x_exact", comments="", fmt="%.17g")
    summary = {}
    for dq in dqs:
        if not dq > 0:
            raise ValueError("quanta must be positive")
        cfg = ScalarQssConfig(dq=dq, x0=x0, f=lambda x: lam * x, horizon=horizon)
        for meth in methods:
            trace = SCALAR_METHODS[meth](cfg)
            dev = np.max(np.abs(trace.value_at(grid) - exact))
            try:
                mean_err = float(np.mean(timing_error_series(trace, lam)))
            except EmptySeries:
                mean_err = float("nan")
            summary[(dq, meth)] = dict(trace=trace, max_deviation=float(dev),
                                       x_final=float(trace.x[-1]), mean_timing_error=mean_err)
            if out is not None:
                stem = f"{meth}_dq{dq:g}"
                write_trace_csv(trace, lam, out / f"{stem}_trace.csv")
                ds = exact_steps(trace, lam)
                ok = np.isfinite(ds)
                k = np.flatnonzero(ok)
                err = np.abs(trace.dt[ok] - ds[ok]) / ds[ok]
                np.savetxt(out / f"{stem}_timing.csv", np.column_stack([k, trace.t[:-1][ok], err]),
                           delimiter=",", header="k,t_k,rel_err_k", comments="", fmt=["%d", "%.17g", "%.17g"])
    return summary


def order_slopes(dqs=(0.01, 0.005, 0.0025, 0.00125), lam=-0.6, x0=0.1):
    """Log-log slopes of mean timing error against the quantum, per method.

    Errors are averaged over steps starting in the first half of the decay
    (``|x_k| >= x0/2``) so every quantum covers the same stretch of solution.
    """
    slopes = {}
    for meth, sim in SCALAR_METHODS.items():
        errs = []
        for dq in dqs:
            trace = sim(ScalarQssConfig(dq=dq, x0=x0, f=lambda x: lam * x))
            errs.append(mean_timing_error(trace, lam, min_abs_state=0.5 * abs(x0)))
        slopes[meth] = float(np.polyfit(np.log(dqs), np.log(errs), 1)[0])
    return slopes


# -- quantum traces --------------------------------------------------------

def emit_quantum_trace(trajectory: Trajectory, path=None) -> np.ndarray:
    """Per-step ``(k, t, dq, dt)`` rows of an adaptive run, optionally as CSV."""
    dq = trajectory.dq[1:]
    if not trajectory.adaptive or not np.any(np.isfinite(dq)):
        raise NotAdaptive("trajectory has no adaptive quantum records")
    k = np.arange(1, trajectory.t.size)
    rows = np.column_stack([k, trajectory.t[1:], dq, trajectory.dt[1:]])
    if path is not None:
        np.savetxt(path, rows, delimiter=",", header="k,t,dq,dt", comments="",
                   fmt=["%d", "%.17g", "%.17g", "%.17g"])
    return rows
