"""
validation.py
-------------
Oracle suite of a scenario: Monte Carlo against the closed form, solvers
against exhaustive search, and the structural properties of the EE model.
Produces a pass/fail table.
"""

import logging
import math
import time
from typing import Optional

import numpy as np
import pandas as pd

from common.errors import ChannelError, InfeasibleError
from common.storage import write_csv
from model.channel_mc import empirical_sinr, expected_desired_power, mmse_covariance
from model.closed_form import EnergyModel, closed_form_rate, rate_terms, total_power
from optimize.dual import dual_power_allocation, power_bounds
from optimize.fractional import closed_form_antenna, feasible_antennas, newton_antenna_selection, terms_ee
from optimize.joint import joint_optimize_with_traces
from optimize.oracle import grid_search_oracle
from optimize.states import EEOperatingPoint

logger = logging.getLogger(__name__)

MIN_VALIDATION_TRIALS = 1000
MC_ANTENNAS = (64, 128)

REPORT_COLUMNS = ["check", "measured", "threshold", "passed", "seconds"]


def _row(check: str, measured: float, threshold: float, passed: Optional[bool] = None) -> dict:
    if passed is None:
        passed = bool(measured <= threshold)
    return {"check": check, "measured": float(measured), "threshold": float(threshold), "passed": bool(passed)}


def count_local_maxima(values) -> int:
    """Number of points not below both neighbours (ends compare to one side)."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return int(values.size)
    left = np.concatenate(([-np.inf], values[:-1]))
    right = np.concatenate((values[1:], [-np.inf]))
    peaks = (values >= left) & (values > right)
    return int(peaks.sum())


def recompute_point(model: EnergyModel, point: EEOperatingPoint) -> float:
    """
    Largest relative deviation of a point's rate / power / EE from a scalar
    recomputation through `rate_terms`, `closed_form_rate` and `total_power`.
    """
    config = model.config
    rates = [
        closed_form_rate(
            rate_terms(model.fading, model.pilots, point.transmit_power, config, point.n_antennas, cell, user, model.training_snr),
            config,
            model.pilots,
            point.transmit_power,
        )
        for cell in range(config.num_cells)
        for user in range(config.users_per_cell)
    ]
    rate = math.fsum(rates) / len(rates)
    power = total_power(point.transmit_power, model.pilots, point.n_antennas, config, model.power_params).total
    pairs = ((point.rate, rate), (point.total_power, power), (point.ee, rate / power))
    return max(abs(a - b) / max(abs(b), 1e-300) for a, b in pairs)


def _monte_carlo_checks(model: EnergyModel, trials: int, seed: int, threads) -> list:
    config = model.config
    antennas = sorted({min(max(n, config.users_per_cell), config.max_antennas) for n in MC_ANTENNAS})
    transmit_power = config.reference_power
    per_user_power = transmit_power * model.pilots.pilot_power / config.users_per_cell
    terms = model.terms(transmit_power)
    scale = config.users_per_cell * config.bandwidth

    rate_gap = 0.0
    ds_score = 0.0
    for n_antennas in antennas:
        estimate = empirical_sinr(
            config, model.fading, model.pilots, transmit_power, n_antennas, trials, seed=seed, threads=threads
        )
        empirical_rates = scale * np.log2(1.0 + estimate.sinr)
        closed_rates = model.user_rates(n_antennas, transmit_power)
        rate_gap = max(rate_gap, float(np.max(np.abs(closed_rates - empirical_rates) / empirical_rates)))

        exact = expected_desired_power(terms.desired, n_antennas, per_user_power)
        pooled_stderr = math.sqrt(float((estimate.ds_stderr**2).sum()))
        ds_score = max(ds_score, abs(float(estimate.ds_power.sum() - exact.sum())) / pooled_stderr)

    return [
        _row("closed_form_vs_monte_carlo", rate_gap, 0.05),
        _row("desired_signal_unbiased", ds_score, 3.0),
    ]


def _estimate_checks(model: EnergyModel) -> list:
    config = model.config
    gains = model.fading.serving()
    worst = 0.0
    for cell in range(config.num_cells):
        for user in range(config.users_per_cell):
            psi = mmse_covariance(model.fading, config.training_snr, cell, user, model.pilots)
            if gains[cell, user] > 0:
                worst = max(worst, psi / gains[cell, user])
    return [_row("estimate_variance_within_gain", worst, 1.0)]


def _solver_checks(model: EnergyModel, threads) -> list:
    config = model.config
    rows = []
    points = []
    multipliers_ok = True

    transmit_power = config.reference_power
    candidates = feasible_antennas(model, transmit_power)
    if candidates.size == 0:
        raise InfeasibleError(f"no antenna count is feasible at the reference power {transmit_power:g} W")
    selected, _ = newton_antenna_selection(model, transmit_power)
    points.append(selected)
    exhaustive = float(np.max(model.ee(candidates, transmit_power)))
    rows.append(_row("antenna_selection_vs_exhaustive", max(0.0, exhaustive - selected.ee) / exhaustive, 1e-9))

    n_antennas = selected.n_antennas
    allocated, dual_trace = dual_power_allocation(model, n_antennas)
    points.append(allocated)
    multipliers_ok &= all(state.q1 >= 0 and state.q2 >= 0 for state in dual_trace)
    p_lo, p_hi = power_bounds(model, n_antennas)
    grid = np.logspace(math.log10(max(p_lo, p_hi * 1e-8)), math.log10(p_hi), 1000)
    grid_point = grid_search_oracle(model, [n_antennas], grid, threads=threads)
    rows.append(_row("power_allocation_vs_grid", max(0.0, grid_point.ee - allocated.ee) / allocated.ee, 1e-6))

    joint, _, joint_trace = joint_optimize_with_traces(model)
    points.append(joint)
    multipliers_ok &= all(state.q1 >= 0 and state.q2 >= 0 for state in joint_trace)
    joint_grid = grid_search_oracle(
        model,
        config.antenna_range(),
        np.logspace(math.log10(joint.transmit_power) - 3, math.log10(joint.transmit_power) + 1, 200),
        threads=threads,
    )
    rows.append(_row("joint_vs_grid", max(0.0, joint_grid.ee - joint.ee) / joint_grid.ee, 0.01))

    terms = model.user_rate_terms(n_antennas, transmit_power, 0, 0)
    antennas = config.antenna_range()
    single_user_ee = terms_ee(terms, antennas, transmit_power, model.pilots, model.power_params, config)
    best = int(np.argmax(single_user_ee))
    n_closed = closed_form_antenna(
        float(single_user_ee[best]), terms, transmit_power, model.pilots, model.power_params, config, "stationarity"
    )
    rows.append(_row("closed_form_antenna_vs_exhaustive", abs(n_closed - int(antennas[best])), 1.0))

    power_grid = p_hi * np.logspace(-6, 0, 1000)
    ee_curve = [model.ee(n_antennas, p) for p in power_grid]
    peaks = count_local_maxima(ee_curve)
    rows.append(_row("ee_quasi_concave_in_power", peaks, 1.0, passed=peaks == 1))

    base = model.power_params
    circuit_scales = (1.0, 1.5, 2.0, 3.0)
    ee_by_circuit = [
        model.with_power_params(rf_chain=base.rf_chain * s, baseband=base.baseband * s).ee(n_antennas, joint.transmit_power)
        for s in circuit_scales
    ]
    increases = int(np.sum(np.diff(ee_by_circuit) >= 0)) if base.circuit_per_antenna > 0 else 0
    rows.append(_row("ee_decreasing_in_circuit_power", increases, 0.0))

    infeasible = sum(not point.feasible for point in points)
    rows.append(_row("constraints_and_multipliers", infeasible + (0 if multipliers_ok else 1), 0.0))

    worst = max(recompute_point(model, point) for point in points + [grid_point, joint_grid])
    rows.append(_row("operating_point_recomputation", worst, 1e-12))
    return rows


def run_validation(model: EnergyModel, trials: int, seed: int = 0, out=None, threads: Optional[int] = None) -> pd.DataFrame:
    """
    Run the oracle suite.

    Args:
        model (EnergyModel): Scenario bundle.
        trials (int): Monte Carlo trials, >= 1000.
        seed (int): Monte Carlo seed.
        out (str | Path | None): Optional CSV target for the report.
        threads (int | None): Worker cap.

    Returns:
        pd.DataFrame: One row per check: check, measured, threshold, passed
            and seconds, the wall time of the group the check ran in.

    Raises:
        ChannelError: Fewer than 1000 trials.
    """
    if trials < MIN_VALIDATION_TRIALS:
        raise ChannelError(f"validation needs trials >= {MIN_VALIDATION_TRIALS}, got {trials}")

    start_time = time.time()
    groups = (
        ("Monte Carlo", lambda: _monte_carlo_checks(model, trials, seed, threads)),
        ("Estimate", lambda: _estimate_checks(model)),
        ("Solver", lambda: _solver_checks(model, threads)),
    )
    rows = []
    for name, run_group in groups:
        group_start = time.time()
        group_rows = run_group()
        elapsed = time.time() - group_start
        logger.info(f"{name} checks finished in {elapsed:.2f} seconds.")
        rows.extend(dict(row, seconds=elapsed) for row in group_rows)
    report = pd.DataFrame(rows, columns=REPORT_COLUMNS)

    failed = report.loc[~report["passed"], "check"].tolist()
    if failed:
        logger.error(f"Validation failed: {', '.join(failed)}")
    else:
        logger.info(f"All {len(report)} checks passed in {time.time() - start_time:.2f} seconds.")
    if out is not None:
        write_csv(report, out)
    return report
