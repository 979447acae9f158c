"""Disturbance scenarios for the bundled power-system models."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..dae import ApplyFault, ClearFault, DisturbanceEvent, LoadChange
from ..errors import DataError, TopologyError
from ..trapezoid import Scenario, StepSource, TmConfig, Trajectory, simulate
from .model import MultiMachineModel

FAULT_CONDUCTANCE = 1e6


@dataclass
class ScenarioSpec:
    """A model, a horizon, its disturbances and the machine used for error reports.

    ``model`` is kept pristine; every run works on a fresh clone.
    """

    model: MultiMachineModel
    horizon: float = 20.0
    events: list = field(default_factory=list)
    machine: object = 0
    name: str = ""
    source: Optional[StepSource] = None

    def instantiate(self):
        system = self.model.clone()
        return system, Scenario(system.initial_state(), self.horizon, list(self.events))

    def run(self, source: Optional[StepSource] = None, config: TmConfig = TmConfig()) -> Trajectory:
        source = source or self.source
        if source is None:
            raise ValueError("no step source given")
        system, scenario = self.instantiate()
        return simulate(system, scenario, source, config)

    @property
    def speed_index(self) -> int:
        return self.model.speed_index(self.machine)


def make_fault_scenario(model: MultiMachineModel, fault_bus, t_on: float = 1.0, duration: float = 0.08,
                        trip_line=None, horizon: float = 20.0, machine=0,
                        conductance: float = FAULT_CONDUCTANCE) -> ScenarioSpec:
    """Three-phase fault at ``fault_bus``, cleared after ``duration`` by tripping ``trip_line``."""
    bus = str(fault_bus)
    if bus not in model.bus_index:
        raise DataError(f"unknown bus {bus!r}")
    if duration < 0:
        raise ValueError("negative fault duration")
    if trip_line is not None:
        line = model.data.line(trip_line)
        if bus not in (line.from_bus, line.to_bus):
            raise TopologyError(f"line {line.id} is not connected to bus {bus}")
        if not model.is_connected(extra_out=[line.id]):
            raise TopologyError(f"tripping line {line.id} islands a generator")
        trip_line = line.id
    events = [
        DisturbanceEvent(t_on, ApplyFault(bus, conductance), "fault on"),
        DisturbanceEvent(t_on + duration, ClearFault(bus, trip_line), "fault cleared"),
    ]
    return ScenarioSpec(model, horizon, events, machine, name=f"fault@{bus}")


def make_load_loss_scenario(model: MultiMachineModel, buses, dp: float, dq: float = 0.0,
                            t_on: float = 1.0, horizon: float = 20.0, machine=0) -> ScenarioSpec:
    """Disconnect ``dp`` + j``dq`` of load spread over ``buses`` at ``t_on``."""
    buses = tuple(str(b) for b in buses)
    idx = [model.bus_index[b] if b in model.bus_index else None for b in buses]
    if None in idx:
        raise DataError(f"unknown bus in {buses}")
    if dp < 0 or dq < 0:
        raise DataError("load loss must be non-negative")
    if dp > model.load_p[idx].sum() + 1e-12 or dq > model.load_q[idx].sum() + 1e-12:
        raise DataError("load loss exceeds the connected load")
    ev = DisturbanceEvent(t_on, LoadChange(buses, dp, dq), "load loss")
    return ScenarioSpec(model, horizon, [ev], machine, name="load-loss")


def total_load_loss(model: MultiMachineModel, fraction: float, t_on: float = 1.0,
                    horizon: float = 20.0, machine=0) -> ScenarioSpec:
    """Lose ``fraction`` of every load in the system."""
    buses = [model.bus_ids[i] for i in np.flatnonzero((model.load_p > 0) | (model.load_q > 0))]
    idx = [model.bus_index[b] for b in buses]
    return make_load_loss_scenario(model, buses, fraction * model.load_p[idx].sum(),
                                   fraction * model.load_q[idx].sum(), t_on, horizon, machine)
