"""Scalar quantized-state integration (QSS1 and the Adams-Bashforth variant).

The state follows straight segments ``x(t) = x_k + (t - t_k) f(x_k)``. QSS1
ends a segment once the state has moved by one quantum, giving
``dt_k = dq / |f(x_k)|``; this is forward Euler on the dual equation
``t'(x) = 1/|f|``. The AB2 rule applies two-step Adams-Bashforth to the same
dual equation and keeps the piecewise-constant quantized derivative.
"""
import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import EmptySeries, NonFiniteValue

HORIZON = "horizon"
STEADY_STATE = "steady-state"


@dataclass(frozen=True)
class ScalarQssConfig:
    dq: float
    x0: float
    f: Callable[[float], float]
    horizon: float = 20.0
    dt_max: Optional[float] = None
    dt_min: float = 1e-6

    def __post_init__(self):
        if not self.dq > 0:
            raise ValueError("dq must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.dt_max is not None and not self.dt_max > 0:
            raise ValueError("dt_max must be positive")

    @property
    def step_cap(self) -> float:
        return self.horizon if self.dt_max is None else self.dt_max


@dataclass
class ScalarQssTrace:
    """Segment end points ``t``/``x`` (length K+1) and the K steps between them.

    ``truncated[k]`` marks steps cut short by the horizon, so they carry no
    timing prediction.
    """

    t: np.ndarray
    x: np.ndarray
    dt: np.ndarray
    terminated_by: str = HORIZON
    method: str = "qss1"
    dq: float = float("nan")
    truncated: np.ndarray = field(default=None)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.dt = np.asarray(self.dt, dtype=float)
        if self.truncated is None:
            self.truncated = np.zeros(self.dt.size, dtype=bool)

    @property
    def events(self):
        return list(zip(self.t[:-1], self.x[:-1], self.dt))

    def __len__(self):
        return self.dt.size

    def value_at(self, times) -> np.ndarray:
        """Piecewise-linear state; held constant after the last segment."""
        return np.interp(times, self.t, self.x)


def _simulate(config: ScalarQssConfig, ab2: bool, method: str) -> ScalarQssTrace:
    f = config.f
    T = config.horizon
    cap = config.step_cap
    t, x = 0.0, float(config.x0)
    ts, xs, dts, trunc = [t], [x], [], []
    phi_prev = None
    terminated = HORIZON
    while t < T:
        fx = float(f(x))
        if not math.isfinite(fx):
            raise NonFiniteValue(f"f({x!r}) = {fx!r}")
        remaining = T - t
        if fx == 0.0:
            dt = min(cap, remaining)
            ts.append(T if dt == remaining else t + dt)
            xs.append(x)
            dts.append(dt)
            trunc.append(dt == remaining)
            terminated = STEADY_STATE
            break
        phi = 1.0 / abs(fx)
        if ab2 and phi_prev is not None:
            raw = config.dq * (1.5 * phi - 0.5 * phi_prev)
        else:
            raw = config.dq * phi
        clamped = not (config.dt_min <= raw <= cap)
        dt = min(max(raw, config.dt_min), cap)
        cut = dt >= remaining
        if cut:
            dt = remaining
        x = x + dt * fx
        t = T if cut else t + dt
        ts.append(t)
        xs.append(x)
        dts.append(dt)
        trunc.append(cut)
        # a clamped or truncated step breaks the uniform-quantum spacing
        phi_prev = None if (clamped or cut) else phi
    return ScalarQssTrace(np.array(ts), np.array(xs), np.array(dts), terminated,
                          method, config.dq, np.array(trunc, dtype=bool))


def qss1_simulate(config: ScalarQssConfig) -> ScalarQssTrace:
    return _simulate(config, ab2=False, method="qss1")


def ab2_scalar_simulate(config: ScalarQssConfig) -> ScalarQssTrace:
    return _simulate(config, ab2=True, method="ab2")


def exact_crossing_time(x_k: float, dq: float, lam: float) -> Optional[float]:
    """Time for the exact solution of ``x' = lam x`` to move ``dq`` away from ``x_k``.

    Returns ``None`` when that never happens (``lam == 0``, ``x_k == 0``, or a
    decaying state within one quantum of zero).
    """
    if lam == 0.0 or x_k == 0.0:
        return None
    ax = abs(x_k)
    rate = abs(lam)
    if lam < 0.0:
        if ax <= dq:
            return None
        return -math.log1p(-dq / ax) / rate
    return math.log1p(dq / ax) / rate


def exact_steps(trace: ScalarQssTrace, lam: float) -> np.ndarray:
    """Exact crossing interval per step of ``trace`` (NaN where undefined)."""
    out = np.full(trace.dt.size, np.nan)
    for k, xk in enumerate(trace.x[:-1]):
        if trace.truncated[k]:
            continue
        ds = exact_crossing_time(xk, trace.dq, lam)
        if ds is not None:
            out[k] = ds
    return out


def timing_error_series(trace: ScalarQssTrace, lam: float) -> np.ndarray:
    """Relative event-timing errors ``|dt_k - dt*_k| / dt*_k`` where defined."""
    ds = exact_steps(trace, lam)
    ok = np.isfinite(ds)
    if not np.any(ok):
        raise EmptySeries("no step has a defined exact crossing time")
    return np.abs(trace.dt[ok] - ds[ok]) / ds[ok]


def mean_timing_error(trace: ScalarQssTrace, lam: float, min_abs_state: float = 0.0) -> float:
    """Mean relative timing error over steps starting at ``|x_k| >= min_abs_state``.

    Restricting to a fixed band of states makes runs with different quanta
    comparable; without it the mean is dominated by the last few quanta
    above zero, whose count does not scale with ``dq``.
    """
    ds = exact_steps(trace, lam)
    ok = np.isfinite(ds) & (np.abs(trace.x[:-1]) >= min_abs_state)
    if not np.any(ok):
        raise EmptySeries("no step has a defined exact crossing time")
    return float(np.mean(np.abs(trace.dt[ok] - ds[ok]) / ds[ok]))


def write_trace_csv(trace: ScalarQssTrace, lam: float, path) -> None:
    ds = exact_steps(trace, lam)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "t_k", "x_k", "dt_k", "dt_star_k", "rel_err_k"])
        for k in range(trace.dt.size):
            if np.isfinite(ds[k]):
                star = repr(float(ds[k]))
                err = repr(float(abs(trace.dt[k] - ds[k]) / ds[k]))
            else:
                star = err = ""
            w.writerow([k, repr(float(trace.t[k])), repr(float(trace.x[k])),
                        repr(float(trace.dt[k])), star, err])
