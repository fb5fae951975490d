"""
states.py
---------
Iteration records of the solvers, the operating-point type they return and
the CSV-friendly trace export.
"""

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Union

import pandas as pd

from model.closed_form import EnergyModel

TRACE_COLUMNS = ["iteration", "epsilon", "j_value", "q1", "q2", "transmit_power", "n_antennas", "ee"]


@dataclass(frozen=True)
class FractionalState:
    """One Dinkelbach iteration: epsilon_n, J(epsilon_n) and the maximising N."""

    iteration: int
    epsilon: float
    j_value: float
    n_antennas: int
    transmit_power: float = math.nan
    ee: float = math.nan


@dataclass(frozen=True)
class DualState:
    """One iteration of the Lagrange-dual power allocation."""

    iteration: int
    q1: float
    q2: float
    step: float
    epsilon: float
    transmit_power: float
    n_antennas: int
    ee: float


@dataclass(frozen=True)
class EEOperatingPoint:
    """
    A solver result.

    Attributes:
        n_antennas (int): N*.
        transmit_power (float): P_d* in watts.
        pilot_power (float): B_p in watts.
        rate (float): Network rate in bits/s.
        total_power (float): Consumed power per BS in watts.
        ee (float): xi = rate / total_power in bits/J.
        feasible (bool): Budget and rate floor hold.
    """

    n_antennas: int
    transmit_power: float
    pilot_power: float
    rate: float
    total_power: float
    ee: float
    feasible: bool

    def to_dict(self) -> dict:
        return asdict(self)


def operating_point(model: EnergyModel, n_antennas: int, transmit_power: float, rtol: Optional[float] = None) -> EEOperatingPoint:
    """Evaluate the model at (N, P_d) and flag feasibility."""
    kwargs = {} if rtol is None else {"rtol": rtol}
    rate = model.rate(n_antennas, transmit_power)
    power = model.power(n_antennas, transmit_power)
    return EEOperatingPoint(
        n_antennas=int(n_antennas),
        transmit_power=float(transmit_power),
        pilot_power=model.pilots.pilot_power,
        rate=float(rate),
        total_power=float(power),
        ee=float(rate / power),
        feasible=model.feasible(n_antennas, transmit_power, **kwargs),
    )


def trace_frame(trace: Iterable[Union[FractionalState, DualState]]) -> pd.DataFrame:
    """
    Solver trace as a DataFrame with the export columns.

    Fields a state type does not carry are NaN.
    """
    rows = []
    for state in trace:
        row = asdict(state)
        rows.append({column: row.get(column, math.nan) for column in TRACE_COLUMNS})
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)
