"""
fractional.py
-------------
Antenna selection by fractional programming.

The EE ratio f1(N) / f2(N) (rate over consumed power) is maximised with the
Dinkelbach iteration epsilon_{n+1} = f1(N*(epsilon_n)) / f2(N*(epsilon_n)),
which is Newton's method on J(epsilon) = max_N f1(N) - epsilon f2(N) since
dJ/depsilon = -f2(N*). The inner maximisation is exhaustive over the integer
candidates. A closed-form antenna rule is provided as a fast path.
"""

import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from common.config import DINKELBACH_MAX_ITER, DINKELBACH_TOL, EE_KKT_VARIANT, FEASIBILITY_RTOL
from common.errors import InfeasibleError, NonConvergenceError
from model.closed_form import LN2, EnergyModel, RateTerms, papr_factor
from model.scenario import PilotConfig, PowerParams, SystemConfig
from optimize.states import EEOperatingPoint, FractionalState, operating_point

logger = logging.getLogger(__name__)

VARIANTS = ("paper", "stationarity")


def dinkelbach(
    f1: Callable[[np.ndarray], np.ndarray],
    f2: Callable[[np.ndarray], np.ndarray],
    candidates,
    tol: float = DINKELBACH_TOL,
    max_iter: int = DINKELBACH_MAX_ITER,
) -> Tuple[int, float, List[FractionalState]]:
    """
    Maximise f1 / f2 over integer candidates.

    Starts at epsilon = 0 and stops when |J(epsilon)| / f2(N*) < tol or the
    maximiser repeats (then J is exactly zero). Ties go to the first
    candidate, i.e. the smaller N for an ascending set.

    Args:
        f1 (Callable): Numerator, vectorised over candidates.
        f2 (Callable): Denominator (> 0), vectorised over candidates.
        candidates (array-like): Integer candidates, ascending.
        tol (float): Stopping tolerance on |J| / f2.
        max_iter (int): Iteration budget.

    Returns:
        tuple: (N*, epsilon*, trace of FractionalState).

    Raises:
        NonConvergenceError: Budget exhausted; carries the trace.
    """
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    candidates = np.asarray(candidates)
    if candidates.size == 0:
        raise InfeasibleError("no candidate antenna counts")
    numerators = np.asarray(f1(candidates), dtype=float)
    denominators = np.asarray(f2(candidates), dtype=float)

    epsilon = 0.0
    previous = None
    trace = []
    for iteration in range(1, max_iter + 1):
        values = numerators - epsilon * denominators
        best = int(np.argmax(values))
        j_value = float(values[best])
        trace.append(FractionalState(iteration, epsilon, j_value, int(candidates[best])))
        if abs(j_value) / denominators[best] < tol or best == previous:
            return int(candidates[best]), epsilon, trace
        epsilon = float(numerators[best] / denominators[best])
        previous = best
    raise NonConvergenceError(f"Dinkelbach did not converge in {max_iter} iterations", trace)


def feasible_antennas(model: EnergyModel, transmit_power: float, rtol: float = FEASIBILITY_RTOL) -> np.ndarray:
    """Antenna counts in [K, M] meeting the budget and rate floor at P_d."""
    candidates = model.config.antenna_range()
    return candidates[model.feasible(candidates, transmit_power, rtol=rtol)]


def fractional_residual(epsilon: float, model: EnergyModel, transmit_power: float, candidates=None) -> Tuple[float, int]:
    """
    J(epsilon) = max_N rate(N) - epsilon power(N) and its maximiser.

    Args:
        epsilon (float): EE guess in bits/J, >= 0.
        model (EnergyModel): Scenario bundle.
        transmit_power (float): P_d in watts.
        candidates (array-like | None): Antenna counts; defaults to [K, M].

    Returns:
        tuple: (J, N at the maximum).
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    candidates = model.config.antenna_range() if candidates is None else np.asarray(candidates)
    values = model.rate(candidates, transmit_power) - epsilon * model.power(candidates, transmit_power)
    best = int(np.argmax(values))
    return float(values[best]), int(candidates[best])


def newton_antenna_selection(
    model: EnergyModel,
    transmit_power: float,
    tol: float = DINKELBACH_TOL,
    max_iter: int = DINKELBACH_MAX_ITER,
) -> Tuple[EEOperatingPoint, List[FractionalState]]:
    """
    EE-optimal antenna count at a fixed transmit power.

    Args:
        model (EnergyModel): Scenario bundle.
        transmit_power (float): P_d in watts.
        tol (float): Dinkelbach tolerance.
        max_iter (int): Iteration budget.

    Returns:
        tuple: (operating point, trace).

    Raises:
        InfeasibleError: No N in [K, M] meets the constraints at P_d.
        NonConvergenceError: Budget exhausted.
    """
    candidates = feasible_antennas(model, transmit_power)
    if candidates.size == 0:
        raise InfeasibleError(f"no antenna count meets the power budget and rate floor at P_d={transmit_power:g} W")

    n_best, epsilon, trace = dinkelbach(
        lambda n: model.rate(n, transmit_power),
        lambda n: model.power(n, transmit_power),
        candidates,
        tol=tol,
        max_iter=max_iter,
    )
    trace = [_with_point(state, transmit_power, model) for state in trace]
    logger.debug(f"Antenna selection at P_d={transmit_power:g} W: N*={n_best}, eps={epsilon:.6g} in {len(trace)} iterations")
    return operating_point(model, n_best, transmit_power), trace


def _with_point(state: FractionalState, transmit_power: float, model: EnergyModel) -> FractionalState:
    return FractionalState(
        state.iteration,
        state.epsilon,
        state.j_value,
        state.n_antennas,
        transmit_power,
        float(model.ee(state.n_antennas, transmit_power)),
    )


def terms_rate(terms: RateTerms, n_antennas, transmit_power: float, pilots: PilotConfig, config: SystemConfig):
    """Single-user closed-form rate of `terms`, vectorised over N."""
    n = np.asarray(n_antennas, dtype=float)
    x = transmit_power * pilots.pilot_power
    coherent = terms.coherent / terms.n_antennas * n
    sinr = x * n * terms.desired / ((x * (coherent + terms.noncoherent) + terms.noise_term) * config.users_per_cell)
    return config.users_per_cell * config.bandwidth * np.log2(1.0 + sinr)


def terms_power(n_antennas, transmit_power: float, pilots: PilotConfig, power: PowerParams, config: SystemConfig):
    """Consumed power, vectorised over N."""
    n = np.asarray(n_antennas, dtype=float)
    theta = papr_factor(n)
    return theta / config.users_per_cell * (transmit_power + n * pilots.pilot_power) + n * power.circuit_per_antenna


def terms_ee(terms: RateTerms, n_antennas, transmit_power: float, pilots: PilotConfig, power: PowerParams, config: SystemConfig):
    """EE of the single-user objective described by `terms`."""
    return terms_rate(terms, n_antennas, transmit_power, pilots, config) / terms_power(
        n_antennas, transmit_power, pilots, power, config
    )


def _stationarity_gradient(epsilon, terms, transmit_power, pilots, power, config):
    users = config.users_per_cell
    x = transmit_power * pilots.pilot_power
    a = x * terms.desired / users
    c = x * terms.coherent / terms.n_antennas
    d = x * terms.noncoherent + terms.noise_term
    rate_scale = users * config.bandwidth / LN2

    def gradient(n):
        root = math.sqrt(n)
        d_rate = rate_scale * ((a + c) / ((a + c) * n + d) - c / (c * n + d))
        d_theta = 3.0 / (root * (root + 1.0) ** 2)
        d_power = (
            d_theta / users * (transmit_power + n * pilots.pilot_power)
            + papr_factor(n) * pilots.pilot_power / users
            + power.circuit_per_antenna
        )
        return d_rate - epsilon * d_power

    return gradient


def closed_form_antenna_real(
    epsilon: float,
    terms: RateTerms,
    transmit_power: float,
    pilots: PilotConfig,
    power: PowerParams,
    config: SystemConfig,
    variant: Optional[str] = None,
) -> float:
    """
    Unrounded, unclamped closed-form antenna count.

    `paper` evaluates N = [b / (p_c eps ln2) - (P_d B_p phi + n) / (S P_d B_p)] K.
    `stationarity` returns the root of d/dN [f1 - eps f2] for the
    single-user objective of `terms` (phi_Q grows with N, theta(N) included),
    bracketed within one antenna of the integer maximiser over [K, M];
    without a sign change there the maximiser itself is returned.
    """
    variant = (variant or EE_KKT_VARIANT).lower()
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant '{variant}', expected one of {VARIANTS}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")

    if variant == "paper":
        if not power.circuit_per_antenna > 0:
            raise ValueError("p_c must be > 0 for the closed-form antenna rule")
        x = transmit_power * pilots.pilot_power
        first = config.bandwidth / (power.circuit_per_antenna * epsilon * LN2)
        second = (x * terms.phi + terms.noise_term) / (terms.desired * x)
        return (first - second) * config.users_per_cell

    gradient = _stationarity_gradient(epsilon, terms, transmit_power, pilots, power, config)
    grid = np.arange(config.users_per_cell, config.max_antennas + 1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        objective = terms_rate(terms, grid, transmit_power, pilots, config) - epsilon * terms_power(
            grid, transmit_power, pilots, power, config
        )
    # bracket within one antenna of the integer peak; [1, K) is never searched
    peak = float(grid[int(np.nanargmax(objective))])
    low, high = max(peak - 1.0, grid[0]), min(peak + 1.0, grid[-1])
    if gradient(low) <= 0 or gradient(high) >= 0:
        return peak
    return brentq(gradient, low, high, xtol=1e-9)


def closed_form_antenna(
    epsilon: float,
    terms: RateTerms,
    transmit_power: float,
    pilots: PilotConfig,
    power: PowerParams,
    config: SystemConfig,
    variant: Optional[str] = None,
) -> int:
    """
    Closed-form antenna count, rounded and clamped to [K, M].

    Rounding compares the single-user EE of `terms` at floor and ceil; ties
    go to the smaller N.

    Args:
        epsilon (float): Current EE estimate, > 0.
        terms (RateTerms): Terms of the user the rule is evaluated for.
        transmit_power (float): P_d in watts.
        pilots (PilotConfig): Supplies B_p.
        power (PowerParams): Supplies p_c.
        config (SystemConfig): Supplies K, M and b.
        variant (str | None): "paper" or "stationarity"; defaults to
            `EE_KKT_VARIANT`.

    Returns:
        int: N* in [K, M].
    """
    n_real = closed_form_antenna_real(epsilon, terms, transmit_power, pilots, power, config, variant)
    low_bound, high_bound = config.users_per_cell, config.max_antennas
    if not math.isfinite(n_real):
        return high_bound if n_real > 0 else low_bound

    floor_n = min(max(math.floor(n_real), low_bound), high_bound)
    ceil_n = min(max(math.ceil(n_real), low_bound), high_bound)
    if floor_n == ceil_n:
        return floor_n
    with np.errstate(divide="ignore", invalid="ignore"):
        ee_floor, ee_ceil = terms_ee(terms, np.array([floor_n, ceil_n]), transmit_power, pilots, power, config)
    return ceil_n if ee_ceil > ee_floor else floor_n
