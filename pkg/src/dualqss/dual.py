"""Global time-step proposals from the dual (time-as-a-function-of-state) view.

For every differential equation ``x_i' = f_i`` the dual rate is
``phi_i = 1/|f_i|``: the time it takes the state to move one unit. A step
rule applied to ``t_i' = phi_i`` with step ``dq`` yields a candidate time
step per equation, and the global step is the smallest candidate.
"""
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import NonFiniteValue

QSS1_SYNC = "qss1-sync"
QSS_AB2 = "qss-ab2"
MODES = (QSS1_SYNC, QSS_AB2)

NO_BINDING = -1


def compute_phi(f_values) -> np.ndarray:
    """Dual rates ``1/|f|``; exact zeros map to ``+inf``."""
    f = np.atleast_1d(np.asarray(f_values, dtype=float))
    if not np.all(np.isfinite(f)):
        raise NonFiniteValue("derivative vector contains NaN or Inf")
    af = np.abs(f)
    phi = np.full(f.shape, np.inf)
    nz = af > 0.0
    phi[nz] = 1.0 / af[nz]
    return phi


@dataclass(frozen=True)
class DualHistory:
    phi_curr: np.ndarray
    phi_prev: Optional[np.ndarray] = None
    valid: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.valid is None:
            object.__setattr__(self, "valid", np.zeros(self.phi_curr.shape, dtype=bool))

    @classmethod
    def fresh(cls, phi) -> "DualHistory":
        return cls(np.array(phi, dtype=float))


@dataclass(frozen=True)
class StepControlConfig:
    mode: str = QSS1_SYNC
    dq: float = 0.01
    dt_min: float = 1e-6
    dt_max: float = 1.0
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.dq > 0:
            raise ValueError("dq must be positive")
        if not (0 < self.dt_min <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_max")

    def with_dq(self, dq: float) -> "StepControlConfig":
        return replace(self, dq=dq)


def advance_history(history: DualHistory, new_phi) -> DualHistory:
    prev = history.phi_curr
    curr = np.array(new_phi, dtype=float)
    valid = np.isfinite(prev) & np.isfinite(curr)
    return DualHistory(curr, prev.copy(), valid)


def reset_history(history: DualHistory) -> DualHistory:
    return DualHistory(history.phi_curr, None, np.zeros(history.phi_curr.shape, dtype=bool))


def candidate_steps(history: DualHistory, config: StepControlConfig) -> np.ndarray:
    """Per-equation candidate steps before clamping (``inf`` where ``f_i = 0``)."""
    phi = history.phi_curr
    dq = config.dq if config.weights is None else config.dq * np.asarray(config.weights, dtype=float)
    first = dq * phi
    if config.mode == QSS1_SYNC or history.phi_prev is None:
        return first
    cand = first.copy()
    v = history.valid
    cand[v] = (dq if np.isscalar(dq) else dq[v]) * (1.5 * phi[v] - 0.5 * history.phi_prev[v])
    bad = ~(cand > 0.0)
    cand[bad] = first[bad]
    return cand


def propose_step(history: DualHistory, config: StepControlConfig):
    """Return ``(dt, binding_index)`` for the next global step.

    ``binding_index`` is the lowest index attaining the minimum candidate,
    or ``NO_BINDING`` when every candidate is infinite.
    """
    cand = candidate_steps(history, config)
    if cand.size == 0 or not np.any(np.isfinite(cand)):
        return config.dt_max, NO_BINDING
    b = int(np.argmin(cand))
    dt = min(max(cand[b], config.dt_min), config.dt_max)
    return float(dt), b
