import math

import numpy as np
import pytest

from model.closed_form import (
    EnergyModel,
    PowerBreakdown,
    RateTerms,
    closed_form_rate,
    closed_form_sinr,
    componentwise_rate,
    ee_value,
    papr_factor,
    rate_terms,
    total_power,
)
from model.scenario import PilotConfig, PowerParams, SystemConfig

from conftest import make_scenario


def unit_config(users=1, bandwidth=1.0):
    return SystemConfig(num_cells=1, users_per_cell=users, max_antennas=8, bandwidth=bandwidth, noise_power=1.0)


def test_papr_factor_values():
    assert papr_factor(1) == 0.0
    assert papr_factor(4) == pytest.approx(1.0)
    n = np.unique(np.concatenate([np.arange(2, 301), np.logspace(2.5, 6, 500).astype(int)]))
    simplified = 3.0 * (np.sqrt(n) - 1.0) / (np.sqrt(n) + 1.0)
    assert np.allclose(papr_factor(n), simplified, rtol=1e-12, atol=0)
    assert np.all(np.diff(papr_factor(n)) > 0)
    assert 2.99 < papr_factor(10**6) < 3.0
    with pytest.raises(ValueError):
        papr_factor(0)


def test_rate_of_unit_terms():
    terms = RateTerms(desired=1.0, coherent=0.0, noncoherent=0.0, noise_term=1.0, n_antennas=1)
    assert closed_form_rate(terms, unit_config(), PilotConfig(1.0, 1), 1.0) == pytest.approx(1.0)


def test_rate_with_interference():
    terms = RateTerms(desired=2.0, coherent=0.5, noncoherent=0.5, noise_term=1.0, n_antennas=3)
    assert terms.phi == 1.0
    assert closed_form_rate(terms, unit_config(), PilotConfig(1.0, 1), 1.0) == pytest.approx(2.0)


def test_componentwise_form_matches():
    terms = RateTerms(desired=0.3, coherent=0.7, noncoherent=1.9, noise_term=0.05, n_antennas=32)
    config = unit_config(users=4, bandwidth=2e6)
    pilots = PilotConfig(2.0, 4)
    assert componentwise_rate(terms, config, pilots, 3.0) == pytest.approx(
        closed_form_rate(terms, config, pilots, 3.0), rel=1e-14
    )


def test_at_rescales_only_the_coherent_part():
    terms = RateTerms(desired=0.3, coherent=0.8, noncoherent=1.9, noise_term=0.05, n_antennas=16)
    doubled = terms.at(32)
    assert doubled.coherent == pytest.approx(1.6)
    assert (doubled.desired, doubled.noncoherent, doubled.noise_term) == (0.3, 1.9, 0.05)
    assert terms.at(16) is terms


def test_rate_terms_with_unit_gains(unit_scenario):
    config, pilots, _, fading = unit_scenario
    terms = rate_terms(fading, pilots, 1.0, config, 10, 0, 0)
    # denominator 1/(P_d B_p) + two unit gains on the shared pilot
    assert terms.desired == pytest.approx(1.0 / 3.0)
    assert terms.coherent == pytest.approx(10.0 / 3.0)
    assert terms.noncoherent == pytest.approx(2.0 - 2.0 / 3.0)
    assert terms.noise_term == pytest.approx(1.0)


def test_rate_terms_require_positive_power(unit_scenario):
    config, pilots, _, fading = unit_scenario
    with pytest.raises(ValueError):
        rate_terms(fading, pilots, 0.0, config, 10, 0, 0)


def test_sinr_saturates_in_antennas(unit_scenario):
    model = EnergyModel(unit_scenario)
    sinr = [model.sinr(n, 100.0)[0, 0] for n in (16, 32, 64, 128)]
    increments = np.diff(sinr)
    assert np.all(increments > 0)
    assert np.all(np.diff(increments) < 0)


def test_sinr_ratio_tends_to_one(unit_scenario):
    model = EnergyModel(unit_scenario)
    n = 2**14
    ratio = model.sinr(n, 100.0) / model.sinr(2 * n, 100.0)
    assert np.all(ratio < 1.0)
    assert np.all(ratio > 0.99)


def test_rate_strictly_increasing_in_antennas_and_desired():
    config = unit_config(users=4, bandwidth=1e6)
    pilots = PilotConfig(1.0, 4)
    terms = RateTerms(desired=0.3, coherent=0.02, noncoherent=1.2, noise_term=0.1, n_antennas=1)
    by_antennas = [closed_form_rate(terms, config, pilots, 5.0, n) for n in range(4, 257)]
    assert np.all(np.diff(by_antennas) > 0)
    by_desired = [
        closed_form_rate(RateTerms(s, 0.02, 1.2, 0.1, 64), config, pilots, 5.0) for s in np.linspace(0.01, 2.0, 50)
    ]
    assert np.all(np.diff(by_desired) > 0)


def test_total_power_strictly_increasing_in_antennas(model):
    power = model.power(np.arange(2, 257), 100.0)
    assert np.all(np.diff(power) > 0)
    breakdowns = [total_power(100.0, model.pilots, n, model.config, model.power_params).total for n in (2, 3, 256)]
    assert breakdowns[0] < breakdowns[1] < breakdowns[2]


def test_total_power_example():
    config = SystemConfig(1, 2, 8, 1.0, 1.0)
    breakdown = total_power(1.0, PilotConfig(1.0, 2), 4, config, PowerParams(0.25, 0.25, 10.0))
    assert breakdown.theta == pytest.approx(1.0)
    assert breakdown.pa_power == pytest.approx(2.5)
    assert breakdown.circuit_power == pytest.approx(2.0)
    assert breakdown.total == pytest.approx(4.5)


def test_ee_value_rejects_zero_power():
    assert ee_value(10.0, PowerBreakdown(1.0, 1.0, 2.0, 1.0)) == 5.0
    with pytest.raises(ValueError):
        ee_value(10.0, PowerBreakdown(0.0, 0.0, 0.0, 0.0))


def test_ee_strictly_decreasing_in_circuit_power(model):
    values = [model.with_power_params(rf_chain=rf).ee(64, 100.0) for rf in (0.1, 0.5, 1.0, 2.0, 5.0)]
    assert np.all(np.diff(values) < 0)


def test_model_rate_is_mean_of_user_rates(model):
    config = model.config
    expected = np.mean([
        closed_form_rate(rate_terms(model.fading, model.pilots, 50.0, config, 40, j, k), config, model.pilots, 50.0)
        for j in range(config.num_cells)
        for k in range(config.users_per_cell)
    ])
    assert model.rate(40, 50.0) == pytest.approx(expected, rel=1e-12)
    assert np.allclose(model.rate(np.array([40, 80]), 50.0), [model.rate(40, 50.0), model.rate(80, 50.0)], rtol=1e-13)


def test_model_sinr_matches_scalar_path(model):
    terms = model.user_rate_terms(40, 50.0, 1, 2)
    assert model.sinr(40, 50.0)[1, 2] == pytest.approx(closed_form_sinr(terms, model.config, model.pilots, 50.0), rel=1e-13)


def test_power_cap_spends_the_budget(model):
    cap = model.power_cap(64)
    assert cap > 0
    assert model.power(64, cap) == pytest.approx(model.power_params.power_budget, rel=1e-12)
    assert model.feasible(64, cap)
    assert not model.feasible(64, cap * 1.01)


def test_power_cap_negative_when_circuits_exceed_budget():
    model = EnergyModel(make_scenario(power_budget=10.0))
    assert model.power_cap(64) < 0


def test_fewer_pilots_than_users_lowers_ee():
    full = EnergyModel(make_scenario(users=4, pilot_length=4))
    shared = full.with_pilots(pilot_length=2)
    assert shared.ee(64, 100.0) < full.ee(64, 100.0)
    assert math.isclose(shared.power(64, 100.0), full.power(64, 100.0))
