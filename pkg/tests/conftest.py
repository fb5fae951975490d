import numpy as np
import pytest

from model.closed_form import EnergyModel
from model.scenario import (
    LargeScaleFading,
    PilotConfig,
    PowerParams,
    Scenario,
    SystemConfig,
    generate_fading,
)


def make_scenario(
    cells=2,
    users=4,
    max_antennas=128,
    bandwidth=1e6,
    noise_power=1.0,
    pilot_power=1.0,
    pilot_length=None,
    baseband=0.5,
    rf_chain=0.5,
    power_budget=1e4,
    rate_floor=0.0,
    seed=0,
    gains=None,
    reference_power_db=20.0,
):
    """A generated (or explicit-gain) scenario with test-friendly defaults."""
    config = SystemConfig(
        num_cells=cells,
        users_per_cell=users,
        max_antennas=max_antennas,
        bandwidth=bandwidth,
        noise_power=noise_power,
        rate_floor=rate_floor,
        training_snr=1.0,
        reference_power_db=reference_power_db,
    )
    pilots = PilotConfig(pilot_power=pilot_power, pilot_length=pilot_length or users)
    power = PowerParams(baseband=baseband, rf_chain=rf_chain, power_budget=power_budget)
    if gains is None:
        fading = generate_fading(config, spacing=200.0, pathloss_exponent=3.0, seed=seed, min_distance=20.0)
    else:
        fading = LargeScaleFading(np.asarray(gains, dtype=float))
    return Scenario(config, pilots, power, fading)


def random_scenario(seed, **overrides):
    """Scenario with seeded random sizes and powers."""
    rng = np.random.default_rng(seed)
    params = dict(
        cells=int(rng.integers(1, 4)),
        users=int(rng.integers(1, 5)),
        max_antennas=int(rng.integers(40, 161)),
        noise_power=float(10 ** rng.uniform(-1, 1)),
        pilot_power=float(10 ** rng.uniform(-0.5, 0.5)),
        baseband=float(rng.uniform(0.1, 1.0)),
        rf_chain=float(rng.uniform(0.1, 1.0)),
        seed=seed,
    )
    params.update(overrides)
    return make_scenario(**params)


@pytest.fixture
def scenario():
    return make_scenario()


@pytest.fixture
def model(scenario):
    return EnergyModel(scenario)


@pytest.fixture
def unit_scenario():
    """Two cells, one user each, every gain equal to one."""
    return make_scenario(cells=2, users=1, max_antennas=64, gains=np.ones((2, 2, 1)))
