"""Accuracy metrics against a reference trajectory."""
import numpy as np

from ..errors import GridError
from ..trapezoid import Trajectory

GRID_TOL = 1e-9


def avg_error(trajectory: Trajectory, reference: Trajectory, speed_index: int) -> float:
    """Mean absolute rotor-speed deviation on the reference time grid.

    The candidate is linearly interpolated onto the reference points.
    ``speed_index`` is the column of ``x`` holding the speed, see
    :meth:`MultiMachineModel.speed_index`.
    """
    t, tr = trajectory.t, reference.t
    if abs(t[0] - tr[0]) > GRID_TOL or abs(t[-1] - tr[-1]) > GRID_TOL:
        raise GridError(f"horizons differ: [{t[0]}, {t[-1]}] vs [{tr[0]}, {tr[-1]}]")
    w = np.interp(tr, t, trajectory.x[:, speed_index])
    return float(np.mean(np.abs(w - reference.x[:, speed_index])))
