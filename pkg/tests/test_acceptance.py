"""Acceptance checks, one test per criterion, each printing a PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from dualqss.bench import BenchmarkMatrix, order_slopes, run_matrix, run_scalar_study, scenario_from_dict
from dualqss.dae import FunctionDae, SystemState
from dualqss.powersys import avg_error, build_model, make_fault_scenario
from dualqss.quantum import QuantumController, pi_update
from dualqss.scalar import (ScalarQssConfig, ab2_scalar_simulate, exact_crossing_time,
                            mean_timing_error, qss1_simulate, timing_error_series)
from dualqss.trapezoid import AB2, AB2_AD, FIXED, QSS1, Scenario, StepSource, simulate, tm_step

LAM, X0 = -0.6, 0.1


def decay(x):
    return LAM * x


@pytest.fixture(scope="module")
def fault_bench(tmp_path_factory):
    spec = make_fault_scenario(build_model("wscc9"), "7", t_on=1.0, duration=0.08,
                               trip_line="L5-7", horizon=20.0, machine="2")
    configs = [("fixed 0.01", StepSource(FIXED, dt=0.01)),
               ("qss1-sync 0.24", StepSource(QSS1, dq=0.24)),
               ("qss-ab2 0.24", StepSource(AB2, dq=0.24)),
               ("qss-ab2-ad", StepSource(AB2_AD, dq=0.2, dq_max=4.0, alpha=0.5, beta=0.0, tol=0.02))]
    out = tmp_path_factory.mktemp("fault-bench")
    t0 = time.perf_counter()
    rows = run_matrix(BenchmarkMatrix(spec, configs, StepSource(FIXED, dt=0.001), repetitions=3, out=out))
    elapsed = time.perf_counter() - t0
    by = {r["config"]: r for r in rows}
    ad = spec.run(configs[3][1])
    return dict(rows=by, elapsed=elapsed, adaptive=ad)


def test_criterion_1_tracking(verdict):
    t0 = time.perf_counter()
    s = run_scalar_study([0.01], ["qss1"])[(0.01, "qss1")]
    dt = time.perf_counter() - t0
    ok = s["max_deviation"] <= 0.011 and dt < 1.0
    verdict(1, ok, f"max deviation {s['max_deviation']:.4e} (<= 0.011), runtime {dt:.3f} s (< 1 s)")
    assert ok


def test_criterion_2_failure_mode(verdict):
    tr = qss1_simulate(ScalarQssConfig(dq=0.051, x0=X0, f=decay))
    exact = X0 * math.exp(LAM * 20.0)
    sign_change = bool(np.any(np.sign(tr.x[1:]) != np.sign(tr.x[:-1])))
    ok = abs(tr.x[-1]) >= 0.01 and exact < 1e-4 and sign_change and tr.t[-1] == 20.0
    verdict(2, ok, f"|x(20)| = {abs(tr.x[-1]):.4f} (>= 0.01), |x*(20)| = {exact:.2e}, sign change {sign_change}")
    assert ok


def test_criterion_3_timing_error_order(verdict):
    t0 = time.perf_counter()
    q = mean_timing_error(qss1_simulate(ScalarQssConfig(dq=0.001, x0=X0, f=decay)), LAM)
    a = mean_timing_error(ab2_scalar_simulate(ScalarQssConfig(dq=0.001, x0=X0, f=decay)), LAM)
    s = order_slopes((0.01, 0.005, 0.0025, 0.00125))
    dt = time.perf_counter() - t0
    ok = a < q and abs(s["qss1"] - 1) <= 0.3 and abs(s["ab2"] - 2) <= 0.3 and dt < 5.0
    verdict(3, ok, f"mean error AB2 {a:.4e} < QSS1 {q:.4e}; slopes QSS1 {s['qss1']:.3f}, "
                   f"AB2 {s['ab2']:.3f}; runtime {dt:.2f} s")
    assert ok


def test_criterion_4_first_step_oracle(verdict):
    q = qss1_simulate(ScalarQssConfig(dq=0.01, x0=X0, f=decay))
    a = ab2_scalar_simulate(ScalarQssConfig(dq=0.01, x0=X0, f=decay))
    star = exact_crossing_time(X0, 0.01, LAM)
    e0 = timing_error_series(q, LAM)[0]
    # the stated 0.175604 is a rounding slip of (1/0.6) ln(0.1/0.09) = 0.1756009
    checks = [abs(q.dt[0] - 0.166667) <= 5e-7,
              star == pytest.approx(math.log(0.1 / 0.09) / 0.6, rel=1e-14) and abs(star - 0.175604) <= 5e-6,
              abs(e0 - 0.0509) <= 1e-3,
              abs(a.dt[1] - 0.194444) <= 1e-6]
    ok = all(checks)
    verdict(4, ok, f"dt0 {q.dt[0]:.6f}, dt*0 {star:.7f}, e0 {e0:.5f}, AB2 dt1 {a.dt[1]:.6f}")
    assert ok


def test_criterion_5_trapezoid(verdict):
    sys = FunctionDae(1, 0, f=lambda x, y, p: LAM * x)
    h = 0.1
    tr = simulate(sys, Scenario(SystemState(0.0, np.array([X0]), np.zeros(0)), 5.0), StepSource(FIXED, dt=h))
    r = (1 + LAM * h / 2) / (1 - LAM * h / 2)
    rec = float(np.max(np.abs(tr.x[1:, 0] / (tr.x[:-1, 0] * r) - 1)))
    amp = [abs(tm_step(sys, SystemState(0.0, np.array([1.0]), np.zeros(0)), d).x[0])
           for d in (0.01, 0.1, 1.0, 10.0)]
    hs = [0.04, 0.02, 0.01]
    errs = [abs(simulate(sys, Scenario(SystemState(0.0, np.array([1.0]), np.zeros(0)), 10.0),
                         StepSource(FIXED, dt=d)).x[-1, 0] - math.exp(LAM * 10)) for d in hs]
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    ok = rec <= 1e-12 and max(amp) < 1 and abs(slope - 2) <= 0.2
    verdict(5, ok, f"recurrence rel dev {rec:.1e}, max |x+/x| {max(amp):.4f}, slope {slope:.3f}")
    assert ok


def test_criterion_6_table_ordering(fault_bench, verdict):
    rows = fault_bench["rows"]
    e1 = rows["qss1-sync 0.24"]["avg_error"]
    e2 = rows["qss-ab2 0.24"]["avg_error"]
    ead = rows["qss-ab2-ad"]["avg_error"]
    ratio = e1 / e2
    ok = ratio >= 5 and ead <= e2 and fault_bench["elapsed"] < 60
    verdict(6, ok, f"QSS1 {e1:.3e} / AB2 {e2:.3e} = {ratio:.2f} (>= 5); "
                   f"AB2-Ad {ead:.3e} <= AB2 {e2:.3e}: {ead <= e2}; runtime {fault_bench['elapsed']:.1f} s")
    assert ok


def test_criterion_7_step_economy(fault_bench, verdict):
    rows = fault_bench["rows"]
    ad, ref, f01 = rows["qss-ab2-ad"], rows["reference"], rows["fixed 0.01"]
    ok = ad["steps"] * 5 <= ref["steps"] and ad["avg_error"] <= 5 * f01["avg_error"]
    verdict(7, ok, f"steps {ad['steps']} vs {ref['steps']} (ratio {ref['steps'] / ad['steps']:.1f}); "
                   f"error {ad['avg_error']:.3e} vs 5 x {f01['avg_error']:.3e}; "
                   f"wall ms AB2-Ad {ad['wall_ms_median']:.0f}, reference {ref['wall_ms_median']:.0f}")
    assert ok


def test_criterion_8_steady_state_skip(verdict):
    spec = scenario_from_dict({"model": "wscc9", "horizon": 5.0})
    src = StepSource(QSS1, dq=0.24)
    q = spec.run(src)
    ad = spec.run(StepSource(AB2_AD))
    reach = np.flatnonzero(ad.dq[1:] == 4.0)
    ok = q.dt[1] == src.dt_max and reach.size > 0 and reach[0] < 20
    first = int(reach[0]) + 1 if reach.size else None
    verdict(8, ok, f"first QSS1-Sync dt {q.dt[1]} (dt_max {src.dt_max}); dq reaches 4 at step {first}")
    assert ok


def test_criterion_9_pi_oracle(verdict):
    exact = pi_update(QuantumController(dq=0.2, alpha=0.5, beta=0.0, tol=0.02), 0.08).dq
    rng = np.random.default_rng(2024)
    fixed_ok = direction_ok = True
    for _ in range(1000):
        dq = rng.uniform(1e-3, 3.9)
        tol = 10 ** rng.uniform(-4, 1)
        alpha, beta = rng.uniform(0, 1.5), rng.uniform(-1, 1)
        c = QuantumController(dq=dq, alpha=alpha, beta=beta, tol=tol, sigma_curr=tol)
        fixed_ok &= math.isclose(pi_update(c, tol).dq, dq, rel_tol=1e-12)
        sigma = tol * 10 ** rng.uniform(-3, 3)
        p = QuantumController(dq=dq, alpha=max(alpha, 0.1), tol=tol, dq_min=1e-300, dq_max=1e300)
        new = pi_update(p, sigma).dq
        direction_ok &= (new < dq) if sigma > tol else (new > dq) if sigma < tol else True
    ok = exact == 0.1 and fixed_ok and direction_ok
    verdict(9, ok, f"dq+ = {exact!r}; fixed point {fixed_ok}, direction {direction_ok} over 1000 inputs")
    assert ok


def test_criterion_10_quantum_trace_shape(fault_bench, verdict):
    tr = fault_bench["adaptive"]
    t, dq, dt = tr.t[1:], tr.dq[1:], tr.dt[1:]
    on = (t > 1.0) & (t <= 1.08 + 1e-12)
    tail = np.arange(t.size) >= int(0.9 * t.size)
    ok = dq[tail].mean() > dq[on].mean() and dt[tail].mean() > dt[on].mean()
    verdict(10, ok, f"dq tail {dq[tail].mean():.3f} vs fault-on {dq[on].mean():.3f}; "
                    f"dt tail {dt[tail].mean():.4f} vs fault-on {dt[on].mean():.4f}")
    assert ok
