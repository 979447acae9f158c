"""Classical multi-machine transient-stability model as an explicit DAE.

States, per machine ``i``: rotor angle ``delta_i`` [rad] and speed
``omega_i`` [pu], interleaved as ``x = (delta_0, omega_0, delta_1, ...)``.

Algebraic variables: rectangular voltages of every non-infinite bus, stacked
as ``y = (Vr_0 .. Vr_{nb-1}, Vi_0 .. Vi_{nb-1})``.

Each machine is a constant EMF ``E'`` behind ``X'd``, seen by the network as
a Norton source. Loads are constant admittances sized from the power-flow
voltages. Differential equations::

    delta' = Omega_b (omega - 1)
    omega' = (Pm - Pe - D (omega - 1)) / (2 H)

Algebraic equations are the complex current balances ``Y V = I_N(delta)``
split into real and imaginary parts.
"""
import copy
from importlib import resources
from pathlib import Path

import numpy as np

from ..dae import (ApplyFault, ClearFault, ExplicitDaeSystem, LoadChange, SystemState,
                   TripLine, consistent_init)
from ..errors import DataError, PowerFlowError
from .data import NetworkData, load_network
from .powerflow import PowerFlowResult, build_ybus, solve_power_flow

DATASETS = ("smib", "wscc9")


def dataset_path(name: str) -> Path:
    if name not in DATASETS:
        raise DataError(f"unknown bundled dataset {name!r}; choose from {DATASETS}")
    return Path(str(resources.files("dualqss.powersys") / "datasets" / f"{name}.txt"))


class MultiMachineModel(ExplicitDaeSystem):

    def __init__(self, data: NetworkData, pf: PowerFlowResult = None):
        self.data = data.validate()
        self.pf = solve_power_flow(data) if pf is None else pf
        self.omega_base = 2.0 * np.pi * data.frequency

        ids = data.bus_ids()
        self.bus_ids = ids
        self.bus_index = {b: i for i, b in enumerate(ids)}
        self.alg = np.array([i for i, b in enumerate(data.buses) if b.type != "inf"], dtype=int)
        self.inf = np.array([i for i, b in enumerate(data.buses) if b.type == "inf"], dtype=int)
        self.alg_pos = {int(b): k for k, b in enumerate(self.alg)}
        self.nb = self.alg.size
        self.n = 2 * len(data.machines)
        self.m = 2 * self.nb

        mcs = data.machines
        self.machine_buses = [mc.bus for mc in mcs]
        self.H = np.array([mc.H for mc in mcs])
        self.D = np.array([mc.D for mc in mcs])
        self.X = np.array([mc.xd_prime for mc in mcs])
        self.mpos = np.array([self.alg_pos[self.bus_index[mc.bus]] for mc in mcs], dtype=int)

        V = self.pf.V
        self.V_inf = V[self.inf].copy()
        I_gen = np.conj(self.pf.S_gen[[self.bus_index[b] for b in self.machine_buses]]
                        / V[[self.bus_index[b] for b in self.machine_buses]])
        E = V[[self.bus_index[b] for b in self.machine_buses]] + 1j * self.X * I_gen
        self.E = np.abs(E)
        self.Pm = self.pf.S_gen[[self.bus_index[b] for b in self.machine_buses]].real.copy()
        delta0 = np.angle(E)

        nb_all = len(ids)
        self.load_p = np.zeros(nb_all)
        self.load_q = np.zeros(nb_all)
        for ld in data.loads:
            self.load_p[self.bus_index[ld.bus]] += ld.p
            self.load_q[self.bus_index[ld.bus]] += ld.q
        self.v0sq = np.abs(V) ** 2
        self.fault = np.zeros(nb_all, dtype=complex)
        self.out_of_service = set()
        self._assemble()

        self.x0 = np.empty(self.n)
        self.x0[0::2] = delta0
        self.x0[1::2] = 1.0
        Va = V[self.alg]
        self.y0 = np.concatenate([Va.real, Va.imag])

    # -- network assembly -------------------------------------------------

    def load_admittance(self) -> np.ndarray:
        return (self.load_p - 1j * self.load_q) / self.v0sq

    def _assemble(self):
        Y = build_ybus(self.data, self.out_of_service)
        Y[np.diag_indices_from(Y)] += self.load_admittance() + self.fault
        Yaa = Y[np.ix_(self.alg, self.alg)].copy()
        Yaa[self.mpos, self.mpos] += 1.0 / (1j * self.X)
        I_fix = -Y[np.ix_(self.alg, self.inf)] @ self.V_inf if self.inf.size else np.zeros(self.nb, complex)
        self.Ynet = Y
        self.Yaa = Yaa
        G, B = Yaa.real, Yaa.imag
        self._G, self._B = G, B
        self._gy = np.block([[G, -B], [B, G]])
        self._ifix = np.concatenate([I_fix.real, I_fix.imag])

    # -- DAE interface ----------------------------------------------------

    def electrical_power(self, x, y):
        d = x[0::2]
        vr = y[self.mpos]
        vi = y[self.nb + self.mpos]
        return self.E * (vr * np.sin(d) - vi * np.cos(d)) / self.X

    def eval_f(self, x, y):
        w = x[1::2]
        pe = self.electrical_power(x, y)
        out = np.empty(self.n)
        out[0::2] = self.omega_base * (w - 1.0)
        out[1::2] = (self.Pm - pe - self.D * (w - 1.0)) / (2.0 * self.H)
        return out

    def eval_g(self, x, y):
        d = x[0::2]
        r = self._gy @ y - self._ifix
        ex = self.E / self.X
        r[self.mpos] -= ex * np.sin(d)
        r[self.nb + self.mpos] += ex * np.cos(d)
        return r

    def jac_f(self, x, y):
        d = x[0::2]
        n, nb = self.n, self.nb
        k = np.arange(len(self.H))
        vr = y[self.mpos]
        vi = y[nb + self.mpos]
        ex = self.E / self.X
        two_h = 2.0 * self.H
        fx = np.zeros((n, n))
        fx[2 * k, 2 * k + 1] = self.omega_base
        fx[2 * k + 1, 2 * k + 1] = -self.D / two_h
        fx[2 * k + 1, 2 * k] = -ex * (vr * np.cos(d) + vi * np.sin(d)) / two_h
        fy = np.zeros((n, self.m))
        fy[2 * k + 1, self.mpos] = -ex * np.sin(d) / two_h
        fy[2 * k + 1, nb + self.mpos] = ex * np.cos(d) / two_h
        return fx, fy

    def jac_g(self, x, y):
        d = x[0::2]
        k = np.arange(len(self.H))
        ex = self.E / self.X
        gx = np.zeros((self.m, self.n))
        gx[self.mpos, 2 * k] = -ex * np.cos(d)
        gx[self.nb + self.mpos, 2 * k] = -ex * np.sin(d)
        return gx, self._gy

    # -- helpers ----------------------------------------------------------

    def initial_state(self) -> SystemState:
        return consistent_init(self, self.x0, self.y0)

    def machine_index(self, machine) -> int:
        """Resolve a machine given by bus id (str) or position (int)."""
        if isinstance(machine, (int, np.integer)) and not isinstance(machine, bool):
            if not 0 <= machine < len(self.machine_buses):
                raise DataError(f"no machine #{machine}")
            return int(machine)
        key = str(machine)
        if key not in self.machine_buses:
            raise DataError(f"no machine at bus {key!r}")
        return self.machine_buses.index(key)

    def speed_index(self, machine) -> int:
        return 2 * self.machine_index(machine) + 1

    def bus_voltages(self, y) -> np.ndarray:
        """Complex voltages of all buses, infinite buses included."""
        V = np.zeros(len(self.bus_ids), dtype=complex)
        V[self.alg] = y[:self.nb] + 1j * y[self.nb:]
        V[self.inf] = self.V_inf
        return V

    def load_power(self, y) -> np.ndarray:
        """Complex power drawn by each bus load at voltages ``y``."""
        V = self.bus_voltages(y)
        return np.abs(V) ** 2 * np.conj(self.load_admittance())

    def generator_buses(self):
        return set(self.machine_buses) | {self.bus_ids[i] for i in self.inf}

    def is_connected(self, extra_out=()) -> bool:
        """True if all generator and infinite buses share one island."""
        out = set(self.out_of_service) | {str(s) for s in extra_out}
        adj = {b: set() for b in self.bus_ids}
        for ln in self.data.lines:
            if ln.id in out:
                continue
            adj[ln.from_bus].add(ln.to_bus)
            adj[ln.to_bus].add(ln.from_bus)
        sources = self.generator_buses()
        start = next(iter(sources))
        seen, stack = {start}, [start]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return sources <= seen

    def clone(self) -> "MultiMachineModel":
        return copy.deepcopy(self)

    # -- disturbances -----------------------------------------------------

    def _bus(self, bus) -> int:
        key = str(bus)
        if key not in self.bus_index:
            raise DataError(f"unknown bus {key!r}")
        i = self.bus_index[key]
        if i in set(self.inf.tolist()):
            raise DataError(f"bus {key!r} is an infinite bus")
        return i

    def apply_action(self, action) -> None:
        if isinstance(action, ApplyFault):
            self.fault[self._bus(action.bus)] += complex(action.conductance, action.susceptance)
        elif isinstance(action, ClearFault):
            self.fault[self._bus(action.bus)] = 0.0
            if action.trip_line is not None:
                self.out_of_service.add(self.data.line(action.trip_line).id)
        elif isinstance(action, TripLine):
            self.out_of_service.add(self.data.line(action.line).id)
        elif isinstance(action, LoadChange):
            self._change_load(action)
        else:
            super().apply_action(action)
            return
        self._assemble()

    def _change_load(self, action: LoadChange):
        idx = [self._bus(b) for b in action.buses]
        p = self.load_p[idx]
        q = self.load_q[idx]
        tol = 1e-12
        if action.dp > p.sum() + tol or action.dq > q.sum() + tol:
            raise DataError("load change exceeds the connected load")
        if action.dp != 0.0:
            self.load_p[idx] = np.maximum(p - action.dp * p / p.sum(), 0.0) if p.sum() > 0 else p
        if action.dq != 0.0:
            if q.sum() == 0.0:
                raise DataError("no reactive load to change")
            self.load_q[idx] = q - action.dq * q / q.sum()
        if np.isclose(action.dp, p.sum(), rtol=0, atol=tol):
            self.load_p[idx] = 0.0
        if q.sum() != 0.0 and np.isclose(action.dq, q.sum(), rtol=0, atol=tol):
            self.load_q[idx] = 0.0


def build_model(dataset) -> MultiMachineModel:
    """Build a model from a model file path, a bundled dataset name or parsed data."""
    if isinstance(dataset, NetworkData):
        data = dataset
    elif isinstance(dataset, str) and dataset in DATASETS:
        data = load_network(dataset_path(dataset))
    else:
        data = load_network(dataset)
    model = MultiMachineModel(data)
    state = model.initial_state()
    if np.max(np.abs(model.eval_f(state.x, state.y))) > 1e-6:
        raise PowerFlowError("initial point is not an equilibrium")
    model.x0, model.y0 = state.x, state.y
    return model
