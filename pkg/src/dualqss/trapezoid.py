"""Implicit trapezoidal integration of explicit DAEs and the simulation driver.

The driver asks a step source for the next time step. Sources are a fixed
step or one of the dual-system rules (QSS1-Sync, QSS-AB2, QSS-AB2-Ad). The
proposed step is cut at disturbance times and at the horizon, then the
trapezoidal step is solved by Newton's method.
"""
import csv
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dae import (ALG_TOL, DisturbanceEvent, ExplicitDaeSystem, SystemState,
                  apply_event, newton, order_events)
from .dual import (NO_BINDING, QSS1_SYNC, QSS_AB2, DualHistory, StepControlConfig,
                   advance_history, compute_phi, propose_step, reset_history)
from .errors import NonConvergence, SingularJacobian
from .quantum import EMBEDDED, QuantumController, estimate_sigma, pi_update

log = logging.getLogger(__name__)

FIXED = "fixed"
QSS1 = QSS1_SYNC
AB2 = QSS_AB2
AB2_AD = "qss-ab2-ad"
SOURCE_KINDS = (FIXED, QSS1, AB2, AB2_AD)

MAX_RETRIES = 5
SNAP = 1e-9


@dataclass(frozen=True)
class TmConfig:
    newton_tol: float = ALG_TOL
    max_newton_iters: int = 20
    jacobian_refresh: str = "every-iteration"

    def __post_init__(self):
        if not self.newton_tol > 0 or self.max_newton_iters < 1:
            raise ValueError("newton_tol must be positive and max_newton_iters >= 1")
        if self.jacobian_refresh not in ("every-iteration", "first-iteration"):
            raise ValueError(f"unknown jacobian_refresh {self.jacobian_refresh!r}")


def tm_step(system: ExplicitDaeSystem, state: SystemState, dt: float, config: TmConfig = TmConfig()) -> SystemState:
    """One trapezoidal step of length ``dt`` from a consistent ``state``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    n, m = system.n, system.m
    x0, y0 = state.x, state.y
    f0 = system.eval_f(x0, y0)
    h2 = 0.5 * dt
    eye = np.eye(n)

    def residual(z):
        x, y = z[:n], z[n:]
        rx = x - x0 - h2 * (f0 + system.eval_f(x, y))
        if m == 0:
            return rx
        return np.concatenate([rx, system.eval_g(x, y)])

    def jacobian(z):
        x, y = z[:n], z[n:]
        fx, fy = system.jac_f(x, y)
        if m == 0:
            return eye - h2 * fx
        gx, gy = system.jac_g(x, y)
        return np.block([[eye - h2 * fx, -h2 * fy], [gx, gy]])

    if config.jacobian_refresh == "first-iteration":
        frozen = {}

        def jac(z):
            if "J" not in frozen:
                frozen["J"] = jacobian(z)
            return frozen["J"]
    else:
        jac = jacobian

    z0 = np.concatenate([x0 + dt * f0, y0])
    z, _ = newton(residual, jac, z0, tol=config.newton_tol,
                  max_iter=config.max_newton_iters, where="trapezoidal step")
    return SystemState(state.t + dt, z[:n], z[n:])


@dataclass(frozen=True)
class StepSource:
    """How the next time step is chosen.

    ``kind`` is one of ``fixed``, ``qss1-sync``, ``qss-ab2``, ``qss-ab2-ad``.
    ``dq`` is the constant quantum, or the initial one in adaptive mode.
    """

    kind: str = FIXED
    dt: float = 0.01
    dq: float = 0.2
    dt_min: float = 1e-6
    dt_max: float = 0.1
    dq_min: float = 1e-4
    dq_max: float = 4.0
    alpha: float = 0.5
    beta: float = 0.0
    tol: float = 0.02
    eps_guard: float = 1e-12
    sigma_kind: str = EMBEDDED
    weights: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"unknown step source {self.kind!r}")
        if self.kind == FIXED and not self.dt > 0:
            raise ValueError("fixed step must be positive")

    @property
    def adaptive(self) -> bool:
        return self.kind == AB2_AD

    @property
    def name(self) -> str:
        if self.kind == FIXED:
            return f"fixed[dt={self.dt:g}]"
        if self.kind == AB2_AD:
            return "qss-ab2-ad"
        return f"{self.kind}[dq={self.dq:g}]"

    def step_config(self, dq: float) -> StepControlConfig:
        mode = QSS1_SYNC if self.kind == QSS1 else QSS_AB2
        w = None if self.weights is None else np.asarray(self.weights, dtype=float)
        return StepControlConfig(mode, dq, self.dt_min, self.dt_max, w)

    def controller(self) -> QuantumController:
        return QuantumController(dq=self.dq, dq_min=self.dq_min, dq_max=self.dq_max,
                                 alpha=self.alpha, beta=self.beta, tol=self.tol,
                                 eps_guard=self.eps_guard)


@dataclass
class Scenario:
    initial: SystemState
    horizon: float
    events: Sequence[DisturbanceEvent] = ()


@dataclass
class Trajectory:
    """Accepted solution points. Row 0 is the initial state (``dt`` is NaN)."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    dt: np.ndarray
    dq: np.ndarray
    sigma: np.ndarray
    binding: np.ndarray
    source: str = ""
    adaptive: bool = False
    event_times: list = field(default_factory=list)
    retries: int = 0

    @property
    def steps(self) -> int:
        return self.t.size - 1

    def write_csv(self, path) -> None:
        n = self.x.shape[1]
        m = self.y.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "dt", "dq", "sigma", "binding_index"]
                       + [f"x_{i}" for i in range(n)] + [f"y_{j}" for j in range(m)])
            for k in range(self.t.size):
                w.writerow([repr(float(self.t[k])), repr(float(self.dt[k])),
                            repr(float(self.dq[k])), repr(float(self.sigma[k])),
                            int(self.binding[k])]
                           + [repr(float(v)) for v in self.x[k]]
                           + [repr(float(v)) for v in self.y[k]])

    @classmethod
    def read_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        head, body = rows[0], rows[1:]
        xcols = [i for i, h in enumerate(head) if h.startswith("x_")]
        ycols = [i for i, h in enumerate(head) if h.startswith("y_")]
        data = np.array([[float(v) for v in r] for r in body]) if body else np.zeros((0, len(head)))
        dq = data[:, 2]
        return cls(t=data[:, 0], dt=data[:, 1], dq=dq, sigma=data[:, 3],
                   binding=data[:, 4].astype(int), x=data[:, xcols], y=data[:, ycols],
                   adaptive=bool(np.any(np.isfinite(dq[1:]))) and np.unique(dq[1:]).size > 1)


def _binding_sigma(history: DualHistory, b: int, dq_eff: float, dt_max: float, kind: str) -> float:
    if b == NO_BINDING:
        return 0.0
    # dual rates above this cap cannot change the clamped step
    cap = dt_max / dq_eff
    pc = min(history.phi_curr[b], cap)
    pp = min(history.phi_prev[b], cap)
    return estimate_sigma(pc, pp, dq_eff, kind)


def simulate(system: ExplicitDaeSystem, scenario: Scenario, source: StepSource,
             config: TmConfig = TmConfig()) -> Trajectory:
    """Integrate ``scenario`` on ``system`` with steps drawn from ``source``.

    ``system`` is mutated by the scenario's events.
    """
    T = float(scenario.horizon)
    events = order_events(scenario.events, T)
    state = scenario.initial.copy()
    ev_i = 0
    applied = []
    while ev_i < len(events) and events[ev_i].time <= state.t:
        state = apply_event(system, events[ev_i], state, tol=config.newton_tol)
        applied.append(state.t)
        ev_i += 1

    w = None if source.weights is None else np.asarray(source.weights, dtype=float)
    history = DualHistory.fresh(compute_phi(system.eval_f(state.x, state.y)))
    ctrl = source.controller() if source.adaptive else None
    dq = source.dq

    ts, xs, ys = [state.t], [state.x.copy()], [state.y.copy()]
    dts, dqs, sigs, binds = [np.nan], [np.nan], [np.nan], [NO_BINDING]
    retries = 0
    t = state.t

    while t < T:
        sigma = np.nan
        if source.kind == FIXED:
            dt_prop, b = source.dt, NO_BINDING
            dq_used = np.nan
        else:
            if ctrl is not None and history.phi_prev is not None:
                _, b0 = propose_step(history, source.step_config(ctrl.dq))
                dq_eff = ctrl.dq if (w is None or b0 == NO_BINDING) else ctrl.dq * w[b0]
                sigma = _binding_sigma(history, b0, dq_eff, source.dt_max, source.sigma_kind)
                ctrl = pi_update(ctrl, sigma)
            dq_used = ctrl.dq if ctrl is not None else dq
            dt_prop, b = propose_step(history, source.step_config(dq_used))

        stop = events[ev_i].time if ev_i < len(events) else T
        stop = min(stop, T)
        gap = stop - t
        landing = dt_prop >= gap - SNAP * max(1.0, abs(stop))
        dt = gap if landing else dt_prop

        for attempt in range(MAX_RETRIES + 1):
            try:
                new = tm_step(system, state, dt, config)
                break
            except (NonConvergence, SingularJacobian):
                if attempt == MAX_RETRIES:
                    raise
                retries += 1
                dt *= 0.5
                landing = False
                log.debug("step rejected at t=%.6g, retrying with dt=%.3g", t, dt)
        if landing:
            new.t = stop
        state = new
        t = state.t

        hit = False
        while ev_i < len(events) and events[ev_i].time <= t:
            state = apply_event(system, events[ev_i], state, tol=config.newton_tol)
            applied.append(t)
            ev_i += 1
            hit = True

        phi_new = compute_phi(system.eval_f(state.x, state.y))
        history = advance_history(history, phi_new)
        if hit:
            history = reset_history(history)
            if ctrl is not None:
                # the error history says nothing about the disturbed dynamics
                ctrl = source.controller()

        ts.append(t)
        xs.append(state.x.copy())
        ys.append(state.y.copy())
        dts.append(dt)
        dqs.append(dq_used)
        sigs.append(sigma)
        binds.append(b)

    return Trajectory(np.array(ts), np.array(xs).reshape(len(ts), system.n),
                      np.array(ys).reshape(len(ts), system.m), np.array(dts),
                      np.array(dqs), np.array(sigs), np.array(binds, dtype=int),
                      source=source.name, adaptive=source.adaptive,
                      event_times=applied, retries=retries)
