import math

import numpy as np
import pytest

from common.errors import ChannelError
from model.channel_mc import (
    draw_channels,
    empirical_sinr,
    expected_desired_power,
    mmse_covariance,
    mmse_estimate,
    mrt_precoder,
)
from model.closed_form import EnergyModel, rate_terms
from model.scenario import LargeScaleFading

from conftest import make_scenario


def test_same_seed_same_realization(scenario):
    config, _, _, fading = scenario
    first = draw_channels(config, fading, 16, seed=3, trials=2)
    second = draw_channels(config, fading, 16, seed=3, trials=2)
    assert np.array_equal(first.channels, second.channels)
    assert np.array_equal(first.training_noise, second.training_noise)
    assert first.channels.shape == (2, 2, 2, 4, 16)


def test_zero_gain_gives_zero_channel():
    gains = np.ones((2, 2, 1))
    gains[1, 0, 0] = 0.0
    config, _, _, fading = make_scenario(cells=2, users=1, max_antennas=8, gains=gains)
    realization = draw_channels(config, fading, 8, seed=0)
    assert np.all(realization.channels[:, 1, 0, 0, :] == 0)


def test_channel_energy_law_of_large_numbers():
    gains = np.full((1, 1, 1), 0.25)
    config, _, _, fading = make_scenario(cells=1, users=1, max_antennas=8, gains=gains)
    realization = draw_channels(config, fading, 8, seed=1, trials=100_000)
    energy = (np.abs(realization.channels[:, 0, 0, 0, :]) ** 2).sum(axis=-1)
    assert energy.mean() == pytest.approx(8 * 0.25, rel=0.01)


def test_antenna_count_out_of_range(scenario):
    config, _, _, fading = scenario
    with pytest.raises(ChannelError):
        draw_channels(config, fading, config.users_per_cell - 1, seed=0)
    with pytest.raises(ChannelError):
        draw_channels(config, fading, config.max_antennas + 1, seed=0)


def test_mmse_covariance_examples():
    fading = LargeScaleFading(np.array([[[1.0]]]))
    assert mmse_covariance(fading, 1.0, 0, 0) == pytest.approx(0.5)
    single = LargeScaleFading(np.array([[[0.7]]]))
    assert mmse_covariance(single, math.inf, 0, 0) == pytest.approx(0.7)
    contaminated = LargeScaleFading(np.ones((2, 2, 1)))
    assert mmse_covariance(contaminated, math.inf, 0, 0) == pytest.approx(0.5)


def test_mmse_covariance_bounded_by_gain(scenario):
    _, pilots, _, fading = scenario
    for j in range(fading.num_cells):
        for k in range(fading.users_per_cell):
            psi = mmse_covariance(fading, 2.0, j, k, pilots)
            assert 0 <= psi <= fading.gains[j, j, k]


def test_noiseless_single_cell_estimate_is_exact():
    config, pilots, _, fading = make_scenario(cells=1, users=2, max_antennas=8, gains=[[[0.4, 2.0]]])
    realization = mmse_estimate(draw_channels(config, fading, 8, seed=2, trials=3), fading, pilots, math.inf)
    assert np.allclose(realization.estimates[:, 0, :, :], realization.channels[:, 0, 0, :, :])


def test_estimate_is_deterministic_in_its_inputs(scenario):
    config, pilots, _, fading = scenario
    realization = draw_channels(config, fading, 16, seed=4, trials=2)
    first = mmse_estimate(realization, fading, pilots, 5.0)
    second = mmse_estimate(realization, fading, pilots, 5.0)
    assert np.array_equal(first.estimates, second.estimates)
    assert np.allclose(np.linalg.norm(first.precoders, axis=-1), 1.0, atol=1e-12)


def test_estimate_variance_matches_formula():
    # unit serving gain: Psi = rho F / (1 + rho sum F)
    gains = np.array([[[1.0], [0.5]], [[0.3], [1.0]]])
    config, pilots, _, fading = make_scenario(cells=2, users=1, max_antennas=8, gains=gains)
    rho = 4.0
    realization = mmse_estimate(draw_channels(config, fading, 8, seed=5, trials=100_000), fading, pilots, rho)
    sample = np.mean(np.abs(realization.estimates[:, 0, 0, :]) ** 2)
    expected = rho * 1.0 / (1.0 + rho * (1.0 + 0.5))
    assert sample == pytest.approx(expected, rel=0.02)
    assert expected == pytest.approx(mmse_covariance(fading, rho, 0, 0))


def test_contamination_correlates_equally():
    config, pilots, _, fading = make_scenario(cells=2, users=1, max_antennas=4, gains=np.ones((2, 2, 1)))
    realization = mmse_estimate(draw_channels(config, fading, 4, seed=6, trials=50_000), fading, pilots, 10.0)
    estimate = realization.estimates[:, 0, 0, :].ravel()
    own = realization.channels[:, 0, 0, 0, :].ravel()
    other = realization.channels[:, 0, 1, 0, :].ravel()
    ratio = abs(np.vdot(own, estimate)) / abs(np.vdot(other, estimate))
    assert ratio == pytest.approx(1.0, abs=0.05)


def test_mrt_precoder_examples():
    e1 = np.zeros(4, dtype=complex)
    e1[0] = 1.0
    assert np.allclose(mrt_precoder(e1), e1)
    rng = np.random.default_rng(0)
    h = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    assert np.allclose(mrt_precoder(3.5 * h), mrt_precoder(h))
    assert abs(np.linalg.norm(mrt_precoder(h)) - 1.0) < 1e-12
    with pytest.raises(ChannelError):
        mrt_precoder(np.zeros(4))


def test_zero_power_has_no_signal(scenario):
    config, pilots, _, fading = scenario
    result = empirical_sinr(config, fading, pilots, 0.0, 16, trials=100)
    assert np.all(result.sinr == 0)
    assert np.all(np.isinf(result.un_power))


def test_too_few_trials(scenario):
    config, pilots, _, fading = scenario
    with pytest.raises(ChannelError):
        empirical_sinr(config, fading, pilots, 1.0, 16, trials=99)


def test_perfect_csi_desired_signal():
    config, pilots, _, fading = make_scenario(cells=1, users=1, max_antennas=64, gains=[[[1.0]]])
    result = empirical_sinr(config, fading, pilots, 2.0, 64, trials=10_000, seed=1, training_snr=math.inf)
    terms = rate_terms(fading, pilots, 2.0, config, 64, 0, 0, training_snr=math.inf)
    closed = terms.desired * 64 * 2.0 * pilots.pilot_power / config.users_per_cell
    assert result.ds_power[0, 0] / config.users_per_cell == pytest.approx(closed, rel=0.02)


def test_closed_form_matches_monte_carlo():
    scenario = make_scenario(cells=2, users=4, max_antennas=128)
    config, pilots, _, fading = scenario
    model = EnergyModel(scenario)
    scale = config.users_per_cell * config.bandwidth
    for n_antennas in (64, 128):
        result = empirical_sinr(config, fading, pilots, 100.0, n_antennas, trials=2000, seed=7)
        empirical = scale * np.log2(1.0 + result.sinr)
        closed = model.user_rates(n_antennas, 100.0)
        assert np.max(np.abs(closed - empirical) / empirical) < 0.05


def test_desired_signal_is_unbiased():
    scenario = make_scenario(cells=2, users=4, max_antennas=64)
    config, pilots, _, fading = scenario
    result = empirical_sinr(config, fading, pilots, 100.0, 64, trials=2000, seed=8)
    terms = EnergyModel(scenario).terms(100.0)
    per_user_power = 100.0 * pilots.pilot_power / config.users_per_cell
    exact = expected_desired_power(terms.desired, 64, per_user_power)
    pooled = math.sqrt(float((result.ds_stderr**2).sum()))
    assert abs(result.ds_power.sum() - exact.sum()) < 3 * pooled
    # the closed form's P Psi N sits within 1/(4N) of the exact value
    assert np.allclose(exact, per_user_power * terms.desired * 64, rtol=1.0 / (4 * 64) + 1e-3)


@pytest.mark.parametrize("n_antennas", [64, 128])
def test_closed_form_desired_signal_per_user(n_antennas):
    scenario = make_scenario(cells=2, users=4, max_antennas=128)
    config, pilots, _, fading = scenario
    result = empirical_sinr(config, fading, pilots, 100.0, n_antennas, trials=10_000, seed=0)
    terms = EnergyModel(scenario).terms(100.0)
    per_user_power = 100.0 * pilots.pilot_power / config.users_per_cell
    closed = per_user_power * terms.desired * n_antennas
    z_scores = np.abs(result.ds_power - closed) / result.ds_stderr
    assert z_scores.shape == (2, 4)
    assert np.all(z_scores < 3.0), z_scores


def test_empirical_sinr_saturates(unit_scenario):
    config, pilots, _, fading = unit_scenario
    sinr = [empirical_sinr(config, fading, pilots, 100.0, n, trials=20_000, seed=9).sinr[0, 0] for n in (8, 16, 32)]
    increments = np.diff(sinr)
    assert np.all(increments > 0)
    assert increments[1] < increments[0]


def test_result_independent_of_thread_count(scenario):
    config, pilots, _, fading = scenario
    one = empirical_sinr(config, fading, pilots, 50.0, 32, trials=300, seed=10, threads=1, block_size=16)
    many = empirical_sinr(config, fading, pilots, 50.0, 32, trials=300, seed=10, threads=4, block_size=16)
    assert np.array_equal(one.sinr, many.sinr)
    assert np.array_equal(one.ds_stderr, many.ds_stderr)
    assert one.trials == 300
