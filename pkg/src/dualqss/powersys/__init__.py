"""Desk-scale power-system models and disturbance scenarios."""
from .data import NetworkData, load_network, parse_network
from .model import DATASETS, MultiMachineModel, build_model, dataset_path
from .powerflow import build_ybus, solve_power_flow
from .metrics import avg_error
from .scenarios import (ScenarioSpec, make_fault_scenario, make_load_loss_scenario,
                        total_load_loss)

__all__ = ["NetworkData", "load_network", "parse_network", "DATASETS", "MultiMachineModel",
           "build_model", "dataset_path", "build_ybus", "solve_power_flow", "avg_error",
           "ScenarioSpec", "make_fault_scenario", "make_load_loss_scenario", "total_load_loss"]
