"""Admittance matrix assembly and Newton-Raphson power flow (polar form)."""
from dataclasses import dataclass

import numpy as np

from ..errors import PowerFlowError
from .data import NetworkData


def build_ybus(data: NetworkData, out_of_service=()) -> np.ndarray:
    """Bus admittance matrix of the line network in file bus order.

    Lines use the pi model with half the charging susceptance at each end.
    """
    idx = {b: i for i, b in enumerate(data.bus_ids())}
    nb = len(idx)
    Y = np.zeros((nb, nb), dtype=complex)
    skip = {str(s) for s in out_of_service}
    for ln in data.lines:
        if ln.id in skip:
            continue
        i, j = idx[ln.from_bus], idx[ln.to_bus]
        ys = 1.0 / complex(ln.r, ln.x)
        ysh = 0.5j * ln.b
        Y[i, i] += ys + ysh
        Y[j, j] += ys + ysh
        Y[i, j] -= ys
        Y[j, i] -= ys
    return Y


@dataclass
class PowerFlowResult:
    V: np.ndarray          # complex bus voltages, file bus order
    S_gen: np.ndarray      # complex generation per bus (slack/pv/inf)
    iterations: int
    mismatch: float


def specified_injections(data: NetworkData):
    idx = {b: i for i, b in enumerate(data.bus_ids())}
    nb = len(idx)
    P = np.zeros(nb)
    Q = np.zeros(nb)
    for mc in data.machines:
        P[idx[mc.bus]] += mc.p_gen
    for ld in data.loads:
        P[idx[ld.bus]] -= ld.p
        Q[idx[ld.bus]] -= ld.q
    return P, Q


def solve_power_flow(data: NetworkData, tol: float = 1e-10, max_iter: int = 30) -> PowerFlowResult:
    Y = build_ybus(data)
    types = [b.type for b in data.buses]
    nb = len(types)
    Vm = np.array([b.v_set if b.type != "pq" else 1.0 for b in data.buses])
    Va = np.radians([b.angle_deg if b.type in ("slack", "inf") else 0.0 for b in data.buses])
    Psp, Qsp = specified_injections(data)

    pv = [i for i, t in enumerate(types) if t == "pv"]
    pq = [i for i, t in enumerate(types) if t == "pq"]
    ang = pv + pq

    def mismatch(V):
        S = V * np.conj(Y @ V)
        return np.concatenate([S.real[ang] - Psp[ang], S.imag[pq] - Qsp[pq]])

    V = Vm * np.exp(1j * Va)
    F = mismatch(V)
    for it in range(max_iter + 1):
        err = np.max(np.abs(F)) if F.size else 0.0
        if err <= tol:
            break
        if it == max_iter:
            raise PowerFlowError(f"power flow did not converge (mismatch {err:.3e})")
        Ibus = Y @ V
        diagV = np.diag(V)
        dS_dVa = 1j * diagV @ np.conj(np.diag(Ibus) - Y @ diagV)
        dS_dVm = diagV @ np.conj(Y @ np.diag(V / np.abs(V))) + np.conj(np.diag(Ibus)) @ np.diag(V / np.abs(V))
        J = np.block([
            [dS_dVa.real[np.ix_(ang, ang)], dS_dVm.real[np.ix_(ang, pq)]],
            [dS_dVa.imag[np.ix_(pq, ang)], dS_dVm.imag[np.ix_(pq, pq)]],
        ])
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise PowerFlowError(f"singular power-flow Jacobian: {exc}") from exc
        Va[ang] += dx[:len(ang)]
        Vm[pq] += dx[len(ang):]
        V = Vm * np.exp(1j * Va)
        F = mismatch(V)
        if not np.all(np.isfinite(F)):
            raise PowerFlowError("power flow diverged")

    S = V * np.conj(Y @ V)
    S_load = np.zeros(nb, dtype=complex)
    idx = {b: i for i, b in enumerate(data.bus_ids())}
    for ld in data.loads:
        S_load[idx[ld.bus]] += complex(ld.p, ld.q)
    return PowerFlowResult(V, S + S_load, it, err)
