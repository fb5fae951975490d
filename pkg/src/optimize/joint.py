"""
joint.py
--------
Alternating antenna selection and power allocation.
"""

import logging
from typing import List, Optional, Tuple

from common.config import JOINT_MAX_ITER, JOINT_TOL
from common.errors import InfeasibleError, NonConvergenceError
from model.closed_form import EnergyModel
from optimize.dual import dual_power_allocation, power_bounds
from optimize.fractional import newton_antenna_selection
from optimize.states import DualState, EEOperatingPoint, FractionalState

logger = logging.getLogger(__name__)


def _better(candidate: EEOperatingPoint, best: Optional[EEOperatingPoint]) -> bool:
    if best is None or candidate.ee > best.ee:
        return True
    if candidate.ee < best.ee:
        return False
    return (candidate.n_antennas, candidate.transmit_power) < (best.n_antennas, best.transmit_power)


def _first_feasible_antennas(model: EnergyModel) -> int:
    for n_antennas in model.config.antenna_range():
        try:
            power_bounds(model, int(n_antennas))
        except InfeasibleError:
            continue
        return int(n_antennas)
    raise InfeasibleError("no antenna count admits a feasible transmit power")


def joint_optimize_with_traces(
    model: EnergyModel,
    tol: float = JOINT_TOL,
    max_iter: int = JOINT_MAX_ITER,
    transmit_power: Optional[float] = None,
    variant: Optional[str] = None,
) -> Tuple[EEOperatingPoint, List[FractionalState], List[DualState]]:
    """
    `joint_optimize` that also returns the concatenated solver traces.

    Returns:
        tuple: (best point, antenna-selection trace, power-allocation trace).
    """
    antenna_trace: List[FractionalState] = []
    power_trace: List[DualState] = []

    if transmit_power is not None:
        point, trace = newton_antenna_selection(model, transmit_power)
        return point, trace, power_trace

    config = model.config
    point, trace = dual_power_allocation(model, _first_feasible_antennas(model), variant=variant)
    power_trace.extend(trace)
    best = point
    if config.max_antennas == config.users_per_cell:
        return best, antenna_trace, power_trace

    for round_index in range(1, max_iter + 1):
        previous_ee = best.ee

        selected, trace = newton_antenna_selection(model, best.transmit_power)
        antenna_trace.extend(trace)
        if _better(selected, best):
            best = selected

        allocated, trace = dual_power_allocation(model, best.n_antennas, variant=variant)
        power_trace.extend(trace)
        if _better(allocated, best):
            best = allocated

        logger.debug(f"Joint round {round_index}: N={best.n_antennas}, P_d={best.transmit_power:.6g} W, ee={best.ee:.6g}")
        if best.ee - previous_ee <= tol * best.ee:
            return best, antenna_trace, power_trace

    raise NonConvergenceError(f"joint optimisation did not converge in {max_iter} rounds", antenna_trace + power_trace)


def joint_optimize(
    model: EnergyModel,
    tol: float = JOINT_TOL,
    max_iter: int = JOINT_MAX_ITER,
    transmit_power: Optional[float] = None,
    variant: Optional[str] = None,
) -> EEOperatingPoint:
    """
    EE-optimal (N, P_d) by alternating the two solvers.

    Starts at the smallest feasible N (normally K) with its optimal power,
    then alternates antenna selection (P_d fixed) and power allocation
    (N fixed), keeping the best point so the EE never decreases. Stops when
    a round improves EE by at most `tol` relative.

    Args:
        model (EnergyModel): Scenario bundle.
        tol (float): Relative improvement threshold.
        max_iter (int): Round budget.
        transmit_power (float | None): Fix P_d and select antennas only.
        variant (str | None): Variant of the power-allocation candidate.

    Returns:
        EEOperatingPoint: The best point found.
    """
    point, _, _ = joint_optimize_with_traces(model, tol, max_iter, transmit_power, variant)
    return point
