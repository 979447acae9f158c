"""Command-line entry point: ``dualqss {bench,scalar,run,compare}``."""
import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench
from .errors import DualQssError
from .powersys.metrics import avg_error
from .trapezoid import SOURCE_KINDS, StepSource, Trajectory


def _source(args) -> StepSource:
    kw = dict(kind=args.mode)
    for key in ("dt", "dq", "tol", "alpha", "beta", "dq_max", "dt_max"):
        val = getattr(args, key)
        if val is not None:
            kw[key] = val
    if args.dq_init is not None:
        kw["dq"] = args.dq_init
    return StepSource(**kw)


def cmd_bench(args) -> int:
    matrix = bench.BenchmarkMatrix.from_file(args.matrix, out=args.out, repetitions=args.reps)
    if args.workers:
        matrix.workers = args.workers
    rows = bench.run_matrix(matrix)
    sys.stdout.write(bench.format_table(rows))
    return 0 if all(r["status"] == "ok" for r in rows) else 1


def cmd_scalar(args) -> int:
    out = Path(args.out)
    summary = bench.run_scalar_study(args.dq, args.method, out, lam=args.rate, x0=args.x0,
                                     horizon=args.horizon)
    print(f"{'dq':>10} {'method':>6} {'events':>7} {'max dev':>11} {'x(T)':>11} {'mean e':>10}")
    for (dq, meth), s in summary.items():
        print(f"{dq:10g} {meth:>6} {len(s['trace']):7d} {s['max_deviation']:11.4e} "
              f"{s['x_final']:11.4e} {s['mean_timing_error']:10.4e}")
    return 0


def cmd_run(args) -> int:
    scen = Path(args.scenario or bench.config_path("wscc9_fault.json"))
    d = json.loads(scen.read_text())
    if args.model:
        d["model"] = args.model
    spec = bench.scenario_from_dict(d, scen.parent)
    traj = spec.run(_source(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traj.write_csv(out / "trajectory.csv")
    if traj.adaptive:
        bench.emit_quantum_trace(traj, out / "quantum_trace.csv")
    w = traj.x[:, spec.speed_index]
    print(f"{traj.source}: {traj.steps} steps, final t={traj.t[-1]:g}, "
          f"speed range [{w.min():.6f}, {w.max():.6f}]")
    return 0


def cmd_compare(args) -> int:
    cand = Trajectory.read_csv(args.candidate)
    ref = Trajectory.read_csv(args.reference)
    print(f"avg_error = {avg_error(cand, ref, args.speed_index):.6e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dualqss", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run a benchmark matrix file")
    b.add_argument("matrix", nargs="?", default=str(bench.config_path("bench_fault.json")))
    b.add_argument("--out")
    b.add_argument("--reps", type=int)
    b.add_argument("--workers", type=int)
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("scalar", help="test-equation studies x' = rate * x")
    s.add_argument("--dq", type=float, nargs="+", default=[0.01, 0.051, 0.001])
    s.add_argument("--method", nargs="+", choices=sorted(bench.SCALAR_METHODS), default=["qss1", "ab2"])
    s.add_argument("--rate", type=float, default=-0.6)
    s.add_argument("--x0", type=float, default=0.1)
    s.add_argument("--horizon", type=float, default=20.0)
    s.add_argument("--out", default="scalar-out")
    s.set_defaults(func=cmd_scalar)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("--scenario", help="scenario JSON file (default: bundled 9-bus fault)")
    r.add_argument("--model", help="bundled model name or model file, overrides the scenario's")
    r.add_argument("--mode", choices=SOURCE_KINDS, default="qss-ab2-ad")
    r.add_argument("--dt", type=float)
    r.add_argument("--dq", type=float)
    r.add_argument("--tol", type=float)
    r.add_argument("--alpha", type=float)
    r.add_argument("--beta", type=float)
    r.add_argument("--dq-max", dest="dq_max", type=float)
    r.add_argument("--dq-init", dest="dq_init", type=float)
    r.add_argument("--dt-max", dest="dt_max", type=float)
    r.add_argument("--out", default="run-out")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="average speed error between two trajectory CSVs")
    c.add_argument("candidate")
    c.add_argument("reference")
    c.add_argument("--speed-index", type=int, default=1, help="state column holding the speed")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except DualQssError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
