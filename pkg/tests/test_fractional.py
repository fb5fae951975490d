import math

import numpy as np
import pytest

from common.config import EE_DEFAULT_SCENARIO
from common.errors import InfeasibleError, NonConvergenceError
from model.closed_form import EnergyModel, RateTerms
from model.scenario import PilotConfig, PowerParams, SystemConfig, load_scenario
from optimize.fractional import (
    closed_form_antenna,
    closed_form_antenna_real,
    dinkelbach,
    fractional_residual,
    newton_antenna_selection,
    terms_ee,
)
from optimize.states import trace_frame

from conftest import make_scenario, random_scenario


def toy():
    return dinkelbach(lambda n: np.log2(1.0 + n), lambda n: 1.0 + n, np.arange(1, 11))


def test_toy_problem_converges_to_exhaustive_optimum():
    n_best, epsilon, trace = toy()
    assert n_best == 2
    assert epsilon == pytest.approx(math.log2(3) / 3, abs=1e-12)
    assert epsilon == pytest.approx(0.5283, abs=1e-4)
    assert len(trace) <= 6
    assert abs(trace[-1].j_value) < 1e-9


def test_toy_trace_is_monotone():
    _, _, trace = toy()
    epsilons = [state.epsilon for state in trace]
    j_values = [state.j_value for state in trace]
    assert np.all(np.diff(epsilons) >= 0)
    assert np.all(np.diff(j_values) < 0)
    assert [state.n_antennas for state in trace] == [10, 4, 2, 2]


def test_nonconvergence_carries_the_trace():
    with pytest.raises(NonConvergenceError) as info:
        dinkelbach(lambda n: np.log2(1.0 + n), lambda n: 1.0 + n, np.arange(1, 11), max_iter=2)
    assert len(info.value.trace) == 2


def test_residual_at_zero_is_max_rate(model):
    j_value, n_at_max = fractional_residual(0.0, model, 100.0)
    assert n_at_max == model.config.max_antennas
    assert j_value == pytest.approx(model.rate(model.config.max_antennas, 100.0))


def test_residual_strictly_decreasing_in_epsilon(model):
    top = float(model.ee(model.config.antenna_range(), 100.0).max())
    values = [fractional_residual(eps, model, 100.0)[0] for eps in np.linspace(0.0, 2.0 * top, 100)]
    assert np.all(np.diff(values) < 0)


def test_residual_vanishes_at_the_optimal_ratio(model):
    point, _ = newton_antenna_selection(model, 100.0)
    j_value, _ = fractional_residual(point.ee, model, 100.0)
    assert abs(j_value) / point.total_power < 1e-9


def test_single_feasible_antenna_count():
    model = EnergyModel(make_scenario(users=4, max_antennas=4))
    point, trace = newton_antenna_selection(model, 10.0)
    assert point.n_antennas == 4
    assert point.ee == pytest.approx(model.rate(4, 10.0) / model.power(4, 10.0))
    assert len(trace) <= 2


@pytest.mark.parametrize("seed", range(10))
def test_selection_matches_exhaustive_search(seed):
    model = EnergyModel(random_scenario(seed))
    transmit_power = model.config.reference_power
    point, trace = newton_antenna_selection(model, transmit_power)
    candidates = model.config.antenna_range()
    ee = model.ee(candidates, transmit_power)
    assert point.ee == pytest.approx(ee.max(), rel=1e-9)
    assert point.n_antennas == int(candidates[np.argmax(ee)])
    assert point.feasible
    frame = trace_frame(trace)
    assert list(frame["iteration"]) == list(range(1, len(trace) + 1))
    assert frame["q1"].isna().all()


def test_selection_without_feasible_antennas():
    model = EnergyModel(make_scenario(power_budget=3.0))
    with pytest.raises(InfeasibleError):
        newton_antenna_selection(model, 10.0)
    floor = EnergyModel(make_scenario(rate_floor=1e12))
    with pytest.raises(InfeasibleError):
        newton_antenna_selection(floor, 10.0)


def unit_inputs(users=4, max_antennas=64):
    terms = RateTerms(desired=1.0, coherent=0.0, noncoherent=0.0, noise_term=0.0, n_antennas=users)
    config = SystemConfig(1, users, max_antennas, 1.0, 1.0)
    return terms, PilotConfig(1.0, users), PowerParams(0.5, 0.5, 100.0), config


def test_closed_form_antenna_direct_substitution():
    terms, pilots, power, config = unit_inputs()
    assert closed_form_antenna_real(1.0 / math.log(2), terms, 1.0, pilots, power, config, "paper") == pytest.approx(4.0)
    assert closed_form_antenna(1.0 / math.log(2), terms, 1.0, pilots, power, config, "paper") == 4


def test_closed_form_antenna_clamps_to_users():
    terms, pilots, power, config = unit_inputs()
    epsilon = 1.0 / (0.575 * math.log(2))
    assert closed_form_antenna_real(epsilon, terms, 1.0, pilots, power, config, "paper") == pytest.approx(2.3)
    assert closed_form_antenna(epsilon, terms, 1.0, pilots, power, config, "paper") == 4


def test_unknown_variant():
    terms, pilots, power, config = unit_inputs()
    with pytest.raises(ValueError):
        closed_form_antenna(1.0, terms, 1.0, pilots, power, config, "newton")


@pytest.mark.parametrize("seed", range(50))
def test_stationarity_antenna_matches_brute_force(seed):
    scenario = random_scenario(seed)
    model = EnergyModel(scenario)
    config = model.config
    transmit_power = config.reference_power
    terms = model.user_rate_terms(config.users_per_cell, transmit_power, 0, 0)
    antennas = config.antenna_range()
    ee = terms_ee(terms, antennas, transmit_power, model.pilots, model.power_params, config)
    best = int(antennas[np.argmax(ee)])
    epsilon = float(ee.max())

    n_real = closed_form_antenna_real(epsilon, terms, transmit_power, model.pilots, model.power_params, config, "stationarity")
    n_closed = closed_form_antenna(epsilon, terms, transmit_power, model.pilots, model.power_params, config, "stationarity")
    assert config.users_per_cell <= n_closed <= config.max_antennas
    if config.users_per_cell <= n_real <= config.max_antennas:
        assert abs(n_closed - best) <= 1
    else:
        assert n_closed == best


@pytest.mark.parametrize("pilot_power, circuit_half", [(1.0, 0.25), (10.0, 1.0)])
def test_stationarity_antenna_on_the_default_scenario(pilot_power, circuit_half):
    model = EnergyModel(load_scenario(EE_DEFAULT_SCENARIO))
    model = model.with_pilots(pilot_power=pilot_power).with_power_params(baseband=circuit_half, rf_chain=circuit_half)
    config = model.config
    transmit_power = config.reference_power
    terms = model.user_rate_terms(config.users_per_cell, transmit_power, 0, 0)
    antennas = config.antenna_range()
    ee = terms_ee(terms, antennas, transmit_power, model.pilots, model.power_params, config)
    best = int(antennas[np.argmax(ee)])
    epsilon = float(ee.max())

    n_real = closed_form_antenna_real(epsilon, terms, transmit_power, model.pilots, model.power_params, config, "stationarity")
    n_closed = closed_form_antenna(epsilon, terms, transmit_power, model.pilots, model.power_params, config, "stationarity")
    assert config.users_per_cell <= n_real <= config.max_antennas
    assert abs(n_real - best) <= 1.0
    assert abs(n_closed - best) <= 1
