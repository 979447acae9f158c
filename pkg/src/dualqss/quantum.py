"""PI control of the quantum size.

The quantum is rescaled after every accepted step by

    dq_next = (tol/|s_k|)**alpha * (|s_{k-1}|/|s_k|)**beta * dq_k

where ``s_k`` estimates the event-timing error in seconds.
"""
import csv
import math
from dataclasses import dataclass, replace
from typing import Optional

EMBEDDED = "embedded"
HALF_QUANTUM = "half-quantum"


def estimate_sigma(phi_curr: float, phi_prev: Optional[float], dq: float, kind: str = EMBEDDED) -> float:
    """Event-timing error estimate for the binding equation.

    ``embedded`` (default) is the gap between the second- and first-order
    dual steps, ``0.5 * dq * |phi_curr - phi_prev|``. ``half-quantum`` is the
    difference between the step taken with ``dq`` and with ``dq/2``; since
    the step is linear in ``dq`` this is always half the step and is kept
    for comparison only.
    """
    if kind == EMBEDDED:
        if phi_prev is None or not (math.isfinite(phi_curr) and math.isfinite(phi_prev)):
            return 0.0
        return 0.5 * dq * abs(phi_curr - phi_prev)
    if kind == HALF_QUANTUM:
        if not math.isfinite(phi_curr):
            return 0.0
        if phi_prev is None or not math.isfinite(phi_prev):
            full = dq * phi_curr
        else:
            full = dq * (1.5 * phi_curr - 0.5 * phi_prev)
        return abs(full - 0.5 * full)
    raise ValueError(f"unknown sigma estimator {kind!r}")


@dataclass(frozen=True)
class QuantumController:
    dq: float = 0.2
    dq_min: float = 1e-4
    dq_max: float = 4.0
    alpha: float = 0.5
    beta: float = 0.0
    tol: float = 0.02
    sigma_curr: Optional[float] = None
    sigma_prev: Optional[float] = None
    eps_guard: float = 1e-12

    def __post_init__(self):
        if not (0 < self.dq_min <= self.dq_max):
            raise ValueError("need 0 < dq_min <= dq_max")
        if not self.tol > 0 or not self.eps_guard > 0:
            raise ValueError("tol and eps_guard must be positive")
        if not (self.dq_min <= self.dq <= self.dq_max):
            object.__setattr__(self, "dq", min(max(self.dq, self.dq_min), self.dq_max))

    @property
    def dq_init(self) -> float:
        return self.dq

    def update(self, sigma: float) -> "QuantumController":
        return pi_update(self, sigma)


def _bounded(sigma: float, eps: float) -> float:
    # keeps every ratio finite and nonzero, so sigma = 0 or inf still clamps cleanly
    return min(max(abs(sigma), eps), 1.0 / eps)


def pi_update(controller: QuantumController, sigma: float) -> QuantumController:
    """Apply one PI update; the new quantum is ``result.dq``."""
    c = controller
    s = _bounded(sigma, c.eps_guard)
    factor = (c.tol / s) ** c.alpha
    if c.sigma_curr is not None and c.beta != 0.0:
        factor *= (_bounded(c.sigma_curr, c.eps_guard) / s) ** c.beta
    dq = min(max(factor * c.dq, c.dq_min), c.dq_max)
    return replace(c, dq=dq, sigma_prev=c.sigma_curr, sigma_curr=abs(sigma))


def write_controller_csv(path, t, dq, sigma, dt) -> None:
    """Per-step controller trace ``k, t_k, dq_k, sigma_k, dt_k``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "t_k", "dq_k", "sigma_k", "dt_k"])
        for k, row in enumerate(zip(t, dq, sigma, dt)):
            w.writerow([k] + [repr(float(v)) for v in row])
