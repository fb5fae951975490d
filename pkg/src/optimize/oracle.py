"""
oracle.py
---------
Brute-force EE maximisation over an (N, P_d) grid, used to check the
solvers.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from common.config import EE_THREADS, FEASIBILITY_RTOL
from common.errors import InfeasibleError
from model.closed_form import EnergyModel
from optimize.states import EEOperatingPoint, operating_point

logger = logging.getLogger(__name__)


def grid_search_oracle(model: EnergyModel, n_grid, p_grid, threads: Optional[int] = None) -> EEOperatingPoint:
    """
    Best feasible grid point.

    Rows of P_d are evaluated in parallel and reduced in grid order; equal EE
    resolves to the smaller N, then the smaller P_d.

    Args:
        model (EnergyModel): Scenario bundle.
        n_grid (array-like): Antenna counts.
        p_grid (array-like): Transmit powers in watts.
        threads (int | None): Worker count; defaults to `EE_THREADS`.

    Returns:
        EEOperatingPoint: The argmax.

    Raises:
        InfeasibleError: No grid point is feasible.
    """
    n_grid = np.asarray(n_grid, dtype=int)
    p_grid = np.asarray(p_grid, dtype=float)
    if n_grid.size == 0 or p_grid.size == 0:
        raise ValueError("grids must be nonempty")

    def evaluate_row(transmit_power):
        ee = np.asarray(model.ee(n_grid, transmit_power), dtype=float)
        feasible = np.asarray(model.feasible(n_grid, transmit_power, rtol=FEASIBILITY_RTOL))
        return np.where(feasible, ee, -np.inf)

    workers = max(1, min(threads or EE_THREADS, p_grid.size))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(evaluate_row, p_grid))

    best = None
    for transmit_power, row in zip(p_grid, rows):
        for n_antennas, ee in zip(n_grid, row):
            if not np.isfinite(ee):
                continue
            key = (-ee, n_antennas, transmit_power)
            if best is None or key < best:
                best = key
    if best is None:
        raise InfeasibleError("no feasible point on the search grid")

    _, n_best, p_best = best
    logger.debug(f"Grid oracle over {n_grid.size}x{p_grid.size} points: N={n_best}, P_d={p_best:.6g} W, ee={-best[0]:.6g}")
    return operating_point(model, int(n_best), float(p_best))
