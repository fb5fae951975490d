"""
sweep.py
--------
One-dimensional sweeps of EE over antenna count, transmit power or pilot
length, evaluated in closed form, by Monte Carlo or by optimisation.
Rows are produced in ascending x and written as CSV.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from common.config import EE_THREADS
from common.errors import ScenarioValidationError
from common.storage import write_csv
from model.channel_mc import empirical_sinr
from model.closed_form import EnergyModel
from model.scenario import db_to_watts
from optimize.dual import dual_power_allocation
from optimize.fractional import newton_antenna_selection
from optimize.joint import joint_optimize

logger = logging.getLogger(__name__)

VARIABLES = ("antennas", "transmit_power_dbm", "pilot_length")
MODES = ("closed-form", "monte-carlo", "optimize")

SWEEP_COLUMNS = ["x", "rate_bps", "power_w", "ee_bpj"]


@dataclass(frozen=True)
class SweepSpec:
    """
    What to sweep and how to evaluate it.

    Attributes:
        variable (str): "antennas", "transmit_power_dbm" (dB relative to the
            noise power, or watts with `absolute_watts`) or "pilot_length".
        start (float): First grid value.
        stop (float): Last grid value, included when on the grid.
        step (float): Grid step, > 0.
        mode (str): "closed-form", "monte-carlo" or "optimize".
        fixed (dict): Held parameters: `n_antennas`, `transmit_power_db`,
            `transmit_power_w`, `pilot_length`. Missing ones default to M,
            the scenario's reference power and pilot length.
        absolute_watts (bool): Read power values as watts.
        trials (int): Monte Carlo trials per point.
        seed (int): Monte Carlo seed.
    """

    variable: str
    start: float
    stop: float
    step: float
    mode: str = "closed-form"
    fixed: dict = field(default_factory=dict)
    absolute_watts: bool = False
    trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ScenarioValidationError("variable", f"'{self.variable}' is not one of {VARIABLES}")
        if self.mode not in MODES:
            raise ScenarioValidationError("mode", f"'{self.mode}' is not one of {MODES}")
        if not self.step > 0:
            raise ScenarioValidationError("range", f"step must be > 0, got {self.step}")
        if self.stop < self.start:
            raise ScenarioValidationError("range", f"empty range {self.start}:{self.stop}")

    def values(self) -> np.ndarray:
        """Grid values start, start + step, ... up to stop."""
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        values = self.start + self.step * np.arange(count)
        if self.variable in ("antennas", "pilot_length"):
            return np.rint(values).astype(int)
        return values


def parse_range(text: str):
    """Parse `start:stop:step` into three floats."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ScenarioValidationError("range", f"expected start:stop:step, got '{text}'")
    try:
        return tuple(float(part) for part in parts)
    except ValueError as exc:
        raise ScenarioValidationError("range", f"non-numeric value in '{text}'") from exc


def _to_watts(value: float, spec: SweepSpec, model: EnergyModel) -> float:
    return float(value) if spec.absolute_watts else db_to_watts(value, model.config.noise_power)


def _resolve_point(spec: SweepSpec, model: EnergyModel, x):
    """Model, N and P_d of grid value x."""
    fixed = spec.fixed
    config = model.config
    n_antennas = int(fixed.get("n_antennas", config.max_antennas))
    if "transmit_power_w" in fixed:
        transmit_power = float(fixed["transmit_power_w"])
    elif "transmit_power_db" in fixed:
        transmit_power = db_to_watts(fixed["transmit_power_db"], config.noise_power)
    else:
        transmit_power = config.reference_power
    if "pilot_length" in fixed:
        model = model.with_pilots(pilot_length=int(fixed["pilot_length"]))

    if spec.variable == "antennas":
        n_antennas = int(x)
    elif spec.variable == "transmit_power_dbm":
        transmit_power = _to_watts(x, spec, model)
    else:
        model = model.with_pilots(pilot_length=int(x))

    if not config.users_per_cell <= n_antennas <= config.max_antennas:
        raise ScenarioValidationError(
            "n_antennas", f"{n_antennas} outside [K, M] = [{config.users_per_cell}, {config.max_antennas}]"
        )
    if transmit_power < 0:
        raise ScenarioValidationError("transmit_power", f"must be >= 0, got {transmit_power}")
    return model, n_antennas, transmit_power


def _closed_form_row(x, model, n_antennas, transmit_power) -> dict:
    rate = model.rate(n_antennas, transmit_power)
    power = model.power(n_antennas, transmit_power)
    return {"x": x, "rate_bps": rate, "power_w": power, "ee_bpj": rate / power}


def _monte_carlo_row(x, model, n_antennas, transmit_power, spec: SweepSpec, threads) -> dict:
    config = model.config
    estimate = empirical_sinr(
        config, model.fading, model.pilots, transmit_power, n_antennas, spec.trials, seed=spec.seed, threads=threads
    )
    scale = config.users_per_cell * config.bandwidth
    user_rates = scale * np.log2(1.0 + estimate.sinr)
    # delta method per user, users combined as independent
    user_stderr = scale * estimate.std_err / (math.log(2.0) * (1.0 + estimate.sinr))
    rate = float(user_rates.mean())
    rate_stderr = float(np.sqrt((user_stderr**2).sum()) / user_stderr.size)
    power = model.power(n_antennas, transmit_power)
    return {"x": x, "rate_bps": rate, "power_w": power, "ee_bpj": rate / power, "ee_stderr": rate_stderr / power}


def _optimize_row(x, model, n_antennas, transmit_power, spec: SweepSpec) -> dict:
    if spec.variable == "antennas":
        point, _ = dual_power_allocation(model, n_antennas)
    elif spec.variable == "transmit_power_dbm":
        point, _ = newton_antenna_selection(model, transmit_power)
    else:
        point = joint_optimize(model)
    return {
        "x": x,
        "rate_bps": point.rate,
        "power_w": point.total_power,
        "ee_bpj": point.ee,
        "n_antennas": point.n_antennas,
        "transmit_power_w": point.transmit_power,
    }


def run_sweep(spec: SweepSpec, model: EnergyModel, out=None, threads: Optional[int] = None) -> pd.DataFrame:
    """
    Evaluate the sweep and optionally write it as CSV.

    Closed-form and optimisation points run in a thread pool; Monte Carlo
    points run one after another with their trial blocks in parallel.
    Rows are always collected in grid order.

    Args:
        spec (SweepSpec): Sweep definition.
        model (EnergyModel): Scenario bundle.
        out (str | Path | None): CSV target.
        threads (int | None): Worker cap; defaults to `EE_THREADS`.

    Returns:
        pd.DataFrame: Columns x, rate_bps, power_w, ee_bpj, plus ee_stderr
        (Monte Carlo) or n_antennas, transmit_power_w (optimize).
    """
    start_time = time.time()
    values = spec.values()
    points = [(x,) + _resolve_point(spec, model, x) for x in values]
    threads = threads or EE_THREADS
    logger.info(f"Sweep over {spec.variable}: {len(points)} points, mode {spec.mode}")

    if spec.mode == "monte-carlo":
        rows = [_monte_carlo_row(x, m, n, p, spec, threads) for x, m, n, p in points]
    else:
        def evaluate(point):
            x, point_model, n_antennas, transmit_power = point
            if spec.mode == "closed-form":
                return _closed_form_row(x, point_model, n_antennas, transmit_power)
            return _optimize_row(x, point_model, n_antennas, transmit_power, spec)

        with ThreadPoolExecutor(max_workers=max(1, min(threads, len(points)))) as pool:
            rows = list(pool.map(evaluate, points))

    df = pd.DataFrame(rows)
    if out is not None:
        write_csv(df, out)
    logger.info(f"Sweep finished in {time.time() - start_time:.2f} seconds.")
    return df
