"""Explicit DAE systems, disturbance events and consistent initialization.

Systems have the semi-explicit form

    x' = f(x, y)
    0  = g(x, y)

with ``n`` differential states and ``m`` algebraic variables. Subclasses of
:class:`ExplicitDaeSystem` supply ``eval_f``/``eval_g`` and may override the
Jacobian methods; the defaults fall back to central finite differences.
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import NonConvergence, NonFiniteValue, ScheduleError, SingularJacobian

ALG_TOL = 1e-8
COND_LIMIT = 1e12


def fd_jacobian(func: Callable[[np.ndarray], np.ndarray], point, scale: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``func`` at ``point``.

    Column ``j`` uses the step ``scale * max(|point[j]|, 1)``.
    """
    p = np.asarray(point, dtype=float)
    f0 = np.atleast_1d(np.asarray(func(p), dtype=float))
    jac = np.empty((f0.size, p.size))
    for j in range(p.size):
        h = scale * max(abs(p[j]), 1.0)
        up = p.copy()
        dn = p.copy()
        up[j] += h
        dn[j] -= h
        fu = np.atleast_1d(np.asarray(func(up), dtype=float))
        fd = np.atleast_1d(np.asarray(func(dn), dtype=float))
        if not (np.all(np.isfinite(fu)) and np.all(np.isfinite(fd))):
            raise NonFiniteValue(f"non-finite value at perturbed column {j}")
        jac[:, j] = (fu - fd) / (2.0 * h)
    return jac


class ExplicitDaeSystem:
    """Base class for ``x' = f(x, y), 0 = g(x, y)`` systems.

    Instances are mutable: disturbance actions change their parameters, so
    one instance must only serve one simulation at a time.
    """

    n: int = 0
    m: int = 0

    def eval_f(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def eval_g(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jac_f(self, x, y):
        """Return ``(df/dx, df/dy)``."""
        return self._fd_blocks(self.eval_f, x, y, self.n)

    def jac_g(self, x, y):
        """Return ``(dg/dx, dg/dy)``."""
        return self._fd_blocks(self.eval_g, x, y, self.m)

    def fd_jac_f(self, x, y):
        return self._fd_blocks(self.eval_f, x, y, self.n)

    def fd_jac_g(self, x, y):
        return self._fd_blocks(self.eval_g, x, y, self.m)

    def _fd_blocks(self, fun, x, y, rows):
        n = self.n
        z = np.concatenate([x, y])
        if rows == 0:
            return np.zeros((0, n)), np.zeros((0, self.m))
        jac = fd_jacobian(lambda v: fun(v[:n], v[n:]), z)
        return jac[:, :n], jac[:, n:]

    def apply_action(self, action) -> None:
        if callable(action):
            action(self)
            return
        raise TypeError(f"{type(self).__name__} does not understand action {action!r}")


class FunctionDae(ExplicitDaeSystem):
    """An :class:`ExplicitDaeSystem` assembled from plain callables.

    ``params`` is a free-form dict handed to ``f`` and ``g`` as a third
    argument, so callable actions can mutate it.
    """

    def __init__(self, n, m, f, g=None, jac_f=None, jac_g=None, params=None):
        if n < 1 or m < 0:
            raise ValueError("need n >= 1 and m >= 0")
        self.n = n
        self.m = m
        self.params = {} if params is None else dict(params)
        self._f = f
        self._g = g
        self._jf = jac_f
        self._jg = jac_g

    def eval_f(self, x, y):
        return np.asarray(self._f(x, y, self.params), dtype=float).reshape(self.n)

    def eval_g(self, x, y):
        if self.m == 0:
            return np.zeros(0)
        return np.asarray(self._g(x, y, self.params), dtype=float).reshape(self.m)

    def jac_f(self, x, y):
        if self._jf is None:
            return super().jac_f(x, y)
        return self._jf(x, y, self.params)

    def jac_g(self, x, y):
        if self.m == 0:
            return np.zeros((0, self.n)), np.zeros((0, 0))
        if self._jg is None:
            return super().jac_g(x, y)
        return self._jg(x, y, self.params)


@dataclass
class SystemState:
    t: float
    x: np.ndarray
    y: np.ndarray

    def copy(self) -> "SystemState":
        return SystemState(self.t, self.x.copy(), self.y.copy())


# Disturbance action descriptors. Models decide how to realise them.

@dataclass(frozen=True)
class ApplyFault:
    bus: Any
    conductance: float = 1e6
    susceptance: float = 0.0


@dataclass(frozen=True)
class ClearFault:
    bus: Any
    trip_line: Any = None


@dataclass(frozen=True)
class TripLine:
    line: Any


@dataclass(frozen=True)
class LoadChange:
    buses: tuple
    dp: float
    dq: float = 0.0


@dataclass
class DisturbanceEvent:
    time: float
    action: Any
    label: str = field(default="")


def order_events(events: Sequence[DisturbanceEvent], horizon: float) -> list:
    """Sort events by time; ties keep declaration order."""
    for ev in events:
        if not (0.0 <= ev.time <= horizon):
            raise ScheduleError(f"event at t={ev.time} outside [0, {horizon}]")
    return sorted(events, key=lambda ev: ev.time)


def newton(residual, jacobian, z0, tol=ALG_TOL, max_iter=50, check_cond=False, where="newton"):
    """Plain Newton iteration on ``residual(z) = 0`` with the infinity norm."""
    z = np.array(z0, dtype=float)
    r = residual(z)
    if not np.all(np.isfinite(r)):
        raise NonFiniteValue(f"{where}: non-finite residual at initial guess")
    res = np.max(np.abs(r)) if r.size else 0.0
    for it in range(max_iter + 1):
        if res <= tol:
            return z, it
        if it == max_iter:
            break
        J = jacobian(z)
        if check_cond and np.linalg.cond(J) > COND_LIMIT:
            raise SingularJacobian(f"{where}: condition estimate above {COND_LIMIT:g}")
        try:
            dz = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(f"{where}: {exc}") from exc
        z = z + dz
        r = residual(z)
        if not np.all(np.isfinite(r)):
            raise NonConvergence(it + 1, float("inf"), where)
        res = np.max(np.abs(r))
    raise NonConvergence(max_iter, res, where)


def solve_algebraic(system: ExplicitDaeSystem, x, y_guess, tol=ALG_TOL, max_iter=50):
    """Solve ``g(x, y) = 0`` for ``y`` with ``x`` held fixed."""
    if system.m == 0:
        return np.zeros(0)
    y, _ = newton(
        lambda y: system.eval_g(x, y),
        lambda y: system.jac_g(x, y)[1],
        y_guess,
        tol=tol,
        max_iter=max_iter,
        check_cond=True,
        where="algebraic solve",
    )
    return y


def consistent_init(system: ExplicitDaeSystem, x0, y_guess=None, tol=ALG_TOL, t0=0.0) -> SystemState:
    x0 = np.array(x0, dtype=float).reshape(system.n)
    if y_guess is None:
        y_guess = np.zeros(system.m)
    y = solve_algebraic(system, x0, np.asarray(y_guess, dtype=float).reshape(system.m), tol=tol)
    return SystemState(t0, x0, y)


def apply_event(system: ExplicitDaeSystem, event: DisturbanceEvent, state: SystemState, tol=ALG_TOL) -> SystemState:
    """Mutate ``system`` per ``event`` and re-solve the algebraic variables.

    Differential states are continuous across the event and are returned
    unchanged.
    """
    system.apply_action(event.action)
    y = solve_algebraic(system, state.x, state.y, tol=tol)
    return SystemState(state.t, state.x.copy(), y)
