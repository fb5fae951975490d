"""
dual.py
-------
Transmit-power allocation at a fixed antenna count by Lagrange dual
decomposition: a primal step maximising the Lagrangian, a Dinkelbach update
of the EE estimate and projected subgradient updates of the multipliers of
the rate floor (Q1) and the power budget (Q2).
"""

import logging
import math
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from common.config import DUAL_MAX_ITER, DUAL_STEP0, DUAL_TOL, EE_KKT_VARIANT, FEASIBILITY_RTOL
from common.errors import InfeasibleError, NonConvergenceError
from model.closed_form import LN2, EnergyModel, RateTerms, UserTerms, papr_factor
from model.scenario import PilotConfig, SystemConfig
from optimize.fractional import VARIANTS, terms_rate
from optimize.states import DualState, EEOperatingPoint, operating_point

logger = logging.getLogger(__name__)

# Primal search window below the power cap, in decades
SEARCH_DECADES = 8
SEARCH_POINTS = 91
TINY = 1e-300


def _frozen_network_rate(terms: UserTerms, n_antennas: int, transmit_power: float, model: EnergyModel) -> float:
    users = model.config.users_per_cell
    x = transmit_power * model.pilots.pilot_power
    n = float(n_antennas)
    interference = x * (n * terms.coherent_per_antenna + terms.noncoherent) + terms.noise_term
    sinr = x * n * terms.desired / (interference * users)
    return float(np.mean(users * model.config.bandwidth * np.log2(1.0 + sinr)))


def lagrangian_value(
    transmit_power: float,
    dual: DualState,
    epsilon: float,
    model: EnergyModel,
    n_antennas: int,
    terms: Optional[Union[RateTerms, UserTerms]] = None,
) -> float:
    """
    L = r - eps p + Q1 (r - r_min) - Q2 (p - P_max) at P_d.

    p is the consumed power theta(N) / K (P_d + N B_p) + N p_c, the quantity
    the budget constrains; its constant circuit part leaves the maximiser
    unchanged.

    Args:
        transmit_power (float): P_d in watts, >= 0.
        dual (DualState): Supplies Q1 and Q2.
        epsilon (float): EE estimate in bits/J.
        model (EnergyModel): Scenario bundle.
        n_antennas (int): N.
        terms (RateTerms | UserTerms | None): When given, the rate is
            evaluated with these terms held fixed, which makes L concave in
            P_d; otherwise the full model is used.

    Returns:
        float: Lagrangian value.
    """
    if transmit_power < 0:
        raise ValueError(f"transmit_power must be >= 0, got {transmit_power}")
    if terms is None:
        rate = model.rate(n_antennas, transmit_power)
    elif isinstance(terms, RateTerms):
        rate = float(terms_rate(terms, n_antennas, transmit_power, model.pilots, model.config))
    else:
        rate = _frozen_network_rate(terms, n_antennas, transmit_power, model)
    power = model.power(n_antennas, transmit_power)
    return (
        rate
        - epsilon * power
        + dual.q1 * (rate - model.config.rate_floor)
        - dual.q2 * (power - model.power_params.power_budget)
    )


def optimal_power(
    dual: DualState,
    epsilon: float,
    terms: RateTerms,
    config: SystemConfig,
    pilots: PilotConfig,
    n_antennas: int,
    variant: Optional[str] = None,
) -> float:
    """
    Stationary transmit power of the Lagrangian with the terms held fixed.

    `paper`:
        P = [(K (b + Q1) / ((eps + Q2) ln2) - (B_p phi + n) / (B_p N S K)) K]+
    `stationarity`: with alpha = B_p N S / K, beta = B_p phi and
    lambda = (eps + Q2) theta(N) / K, the maximiser solves
    ((alpha + beta) P + n)(beta P + n) = (1 + Q1) K b alpha n / (lambda ln2),
    projected onto [0, inf). theta(N) = 0 gives inf (no power penalty).

    Args:
        dual (DualState): Supplies Q1 and Q2.
        epsilon (float): EE estimate in bits/J.
        terms (RateTerms): Terms of the objective.
        config (SystemConfig): Supplies K and b.
        pilots (PilotConfig): Supplies B_p.
        n_antennas (int): N.
        variant (str | None): "paper" or "stationarity"; defaults to
            `EE_KKT_VARIANT`.

    Returns:
        float: P_d* >= 0 in watts.
    """
    variant = (variant or EE_KKT_VARIANT).lower()
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant '{variant}', expected one of {VARIANTS}")
    price = epsilon + dual.q2
    if not price > 0:
        raise ValueError("epsilon + Q2 must be > 0")
    terms = terms.at(n_antennas)
    users = config.users_per_cell
    b_p = pilots.pilot_power

    if variant == "paper":
        first = users * (config.bandwidth + dual.q1) / (price * LN2)
        second = (b_p * terms.phi + terms.noise_term) / (b_p * n_antennas * terms.desired * users)
        return max(0.0, (first - second) * users)

    theta = papr_factor(n_antennas)
    if theta == 0:
        return math.inf
    alpha = b_p * n_antennas * terms.desired / users
    beta = b_p * terms.phi
    noise = terms.noise_term
    if alpha <= 0:
        return 0.0
    rhs = (1.0 + dual.q1) * users * config.bandwidth * alpha * noise / (price * theta / users * LN2)
    if rhs <= noise**2:
        return 0.0
    a2 = (alpha + beta) * beta
    a1 = noise * (alpha + 2.0 * beta)
    a0 = noise**2 - rhs
    if a2 == 0:
        return -a0 / a1
    # stable positive root of a2 P^2 + a1 P + a0 = 0 with a0 < 0
    return 2.0 * (-a0) / (a1 + math.sqrt(a1**2 - 4.0 * a2 * a0))


def power_bounds(model: EnergyModel, n_antennas: int) -> Tuple[float, float]:
    """
    Feasibility probe: the interval [P_lo, P_hi] of admissible P_d at N.

    P_hi is the largest P_d within the budget; P_lo the smallest reaching the
    rate floor (0 without a floor).

    Raises:
        InfeasibleError: The budget is exhausted by the circuits, or the
            rate floor is unreachable within the budget.
    """
    p_hi = model.power_cap(n_antennas)
    if not p_hi > 0:
        raise InfeasibleError(
            f"power budget {model.power_params.power_budget:g} W leaves no transmit power at N={n_antennas}"
        )
    floor = model.config.rate_floor
    if floor <= 0:
        return 0.0, p_hi
    if model.rate(n_antennas, p_hi) < floor * (1.0 - FEASIBILITY_RTOL):
        raise InfeasibleError(f"rate floor {floor:g} bit/s is unreachable within the budget at N={n_antennas}")
    p_min = p_hi * 10.0 ** (-2 * SEARCH_DECADES)
    if model.rate(n_antennas, p_min) >= floor:
        return p_min, p_hi
    root = brentq(lambda p: model.rate(n_antennas, p) - floor, p_min, p_hi, xtol=p_min, rtol=1e-14)
    return min(p_hi, root * (1.0 + 1e-10)), p_hi


def _mean_terms(model: EnergyModel, n_antennas: int, transmit_power: float) -> RateTerms:
    terms = model.terms(transmit_power)
    return RateTerms(
        desired=float(terms.desired.mean()),
        coherent=float(terms.coherent_per_antenna.mean() * n_antennas),
        noncoherent=float(terms.noncoherent.mean()),
        noise_term=float(terms.noise_term),
        n_antennas=n_antennas,
    )


def _maximize_lagrangian(model, n_antennas, dual, epsilon, p_hi, extra):
    """Global grid in log P_d, refined by a bounded scalar search."""
    grid = p_hi * np.logspace(-SEARCH_DECADES, 1, SEARCH_POINTS)
    values = np.array([lagrangian_value(p, dual, epsilon, model, n_antennas) for p in grid])
    best = int(np.argmax(values))
    lo = math.log(grid[max(best - 1, 0)])
    hi = math.log(grid[min(best + 1, SEARCH_POINTS - 1)])
    result = minimize_scalar(
        lambda u: -lagrangian_value(math.exp(u), dual, epsilon, model, n_antennas),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    candidates = [grid[best], math.exp(result.x)] + [p for p in extra if 0 < p <= grid[-1]]
    scores = [lagrangian_value(p, dual, epsilon, model, n_antennas) for p in candidates]
    return candidates[int(np.argmax(scores))]


def dual_power_allocation(
    model: EnergyModel,
    n_antennas: int,
    tol: float = DUAL_TOL,
    max_iter: int = DUAL_MAX_ITER,
    variant: Optional[str] = None,
) -> Tuple[EEOperatingPoint, List[DualState]]:
    """
    EE-optimal transmit power at a fixed antenna count.

    Each iteration maximises the Lagrangian over P_d (the `optimal_power`
    candidate of the mean user terms is scored alongside a numerical
    search), recovers a feasible point by clipping into [P_lo, P_hi], sets
    the EE estimate to that point's EE and moves the multipliers along the
    normalised constraint violations with step DUAL_STEP0 / sqrt(t).
    Converged when the EE estimate moves by at most tol relative and the
    multipliers are complementary (Q1 > 0 only at P_lo, Q2 > 0 only at P_hi).

    Args:
        model (EnergyModel): Scenario bundle.
        n_antennas (int): N.
        tol (float): Relative tolerance on the EE estimate.
        max_iter (int): Iteration budget.
        variant (str | None): Variant of the `optimal_power` candidate.

    Returns:
        tuple: (operating point, trace of DualState).

    Raises:
        InfeasibleError: Constraints cannot be met at N.
        NonConvergenceError: Budget exhausted; carries the trace.
    """
    p_lo, p_hi = power_bounds(model, n_antennas)
    floor = model.config.rate_floor
    budget = model.power_params.power_budget

    start = min(max(model.config.reference_power, p_lo), p_hi)
    epsilon = float(model.ee(n_antennas, start if start > 0 else p_hi))
    dual = DualState(0, 0.0, 0.0, DUAL_STEP0, epsilon, start, n_antennas, epsilon)
    trace = []
    for iteration in range(1, max_iter + 1):
        step = DUAL_STEP0 / math.sqrt(iteration)
        extra = [p_lo, p_hi]
        if epsilon + dual.q2 > 0:
            reference = min(max(dual.transmit_power, p_lo), p_hi) or p_hi
            terms = _mean_terms(model, n_antennas, reference)
            extra.append(optimal_power(dual, epsilon, terms, model.config, model.pilots, n_antennas, variant))
        primal = _maximize_lagrangian(model, n_antennas, dual, epsilon, p_hi, extra)

        rate = model.rate(n_antennas, primal)
        power = model.power(n_antennas, primal)
        rate_violation = (floor - rate) / max(floor, rate, TINY)
        power_violation = (power - budget) / budget
        q1 = max(0.0, dual.q1 + step * rate_violation)
        q2 = max(0.0, dual.q2 + step * epsilon * power_violation)

        recovered = min(max(primal, p_lo), p_hi)
        new_epsilon = float(model.ee(n_antennas, recovered))
        dual = DualState(iteration, q1, q2, step, epsilon, recovered, n_antennas, new_epsilon)
        trace.append(dual)

        settled = abs(new_epsilon - epsilon) <= tol * max(new_epsilon, TINY)
        complementary = (q1 == 0 or recovered == p_lo) and (q2 == 0 or recovered == p_hi)
        epsilon = new_epsilon
        if settled and complementary:
            logger.debug(
                f"Power allocation at N={n_antennas}: P_d*={recovered:.6g} W, Q1={q1:.3g}, Q2={q2:.3g} "
                f"after {iteration} iterations"
            )
            return operating_point(model, n_antennas, recovered), trace

    raise NonConvergenceError(f"dual power allocation did not converge in {max_iter} iterations", trace)
