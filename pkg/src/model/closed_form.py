"""
closed_form.py
--------------
Analytic layer: rate terms and the closed-form achievable rate of the MRT
downlink, the PAPR-scaled power-consumption model and energy efficiency.

`EnergyModel` binds a scenario and evaluates rate, power and EE vectorised
over antenna counts; the optimizers and sweeps work on it.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from model.scenario import PilotConfig, PowerParams, Scenario, SystemConfig

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)


def papr_factor(n_antennas):
    """
    Peak-to-average power ratio factor theta(N).

    theta = 3 (N - 2 sqrt(N) + 1) / (N - 1) for N >= 2 and theta(1) = 0, the
    value of the identical form 3 (sqrt(N) - 1) / (sqrt(N) + 1).

    Args:
        n_antennas (int | np.ndarray): N >= 1.

    Returns:
        float | np.ndarray: theta in [0, 3).
    """
    n = np.asarray(n_antennas, dtype=float)
    if np.any(n < 1):
        raise ValueError(f"n_antennas must be >= 1, got {n_antennas}")
    root = np.sqrt(n)
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.where(n >= 2, 3.0 * (n - 2.0 * root + 1.0) / (n - 1.0), 0.0)
    return float(theta) if theta.ndim == 0 else theta


@dataclass(frozen=True)
class RateTerms:
    """
    Per-user closed-form quantities.

    Attributes:
        desired (float): S, the estimate variance of the serving link.
        coherent (float): phi_Q at `n_antennas`, pilot-contamination power.
        noncoherent (float): phi_nQ, non-coherent interference power.
        noise_term (float): n = sigma2 / (K P_d).
        n_antennas (int): Antenna count `coherent` was evaluated at.
    """

    desired: float
    coherent: float
    noncoherent: float
    noise_term: float
    n_antennas: int = 1

    @property
    def phi(self) -> float:
        """Combined interference phi = phi_Q + phi_nQ."""
        return self.coherent + self.noncoherent

    def at(self, n_antennas: int) -> "RateTerms":
        """Same terms with phi_Q rescaled to another antenna count."""
        if n_antennas == self.n_antennas:
            return self
        return replace(self, coherent=self.coherent * n_antennas / self.n_antennas, n_antennas=n_antennas)


class UserTerms(NamedTuple):
    """Vectorised rate terms of every user, arrays of shape (L, K)."""

    desired: np.ndarray
    coherent_per_antenna: np.ndarray
    noncoherent: np.ndarray
    noise_term: float


def user_terms(fading, pilots: PilotConfig, transmit_power: float, config: SystemConfig, training_snr=None) -> UserTerms:
    """
    Rate terms of all users at once.

    Pilot sharers of user (j, k) are the users (l, i) whose pilot equals that
    of k. The coherent coefficient of BS l on user (j, k) is
    F[l, j, k]^2 / (1 / rho + sum of BS l's gains over the sharers), where
    rho = P_d B_p unless `training_snr` is given.

    Args:
        fading (LargeScaleFading): Gains.
        pilots (PilotConfig): Pilot power and length.
        transmit_power (float): P_d in watts, > 0.
        config (SystemConfig): Scenario constants.
        training_snr (float | None): Overrides rho.

    Returns:
        UserTerms: S, phi_Q / N, phi_nQ and n.
    """
    if not transmit_power > 0:
        raise ValueError(f"transmit_power must be > 0, got {transmit_power}")
    rho = transmit_power * pilots.pilot_power if training_snr is None else training_snr
    if not rho > 0:
        raise ValueError("training SNR P_d * B_p must be > 0")

    users = config.users_per_cell
    gains = fading.gains
    cells = np.arange(fading.num_cells)
    pilot_index = pilots.pilot_indices(users)
    sharers = np.bincount(pilot_index)[pilot_index]

    # denom[l, k]: estimation denominator at BS l for the pilot of slot k
    denom = 1.0 / rho + fading.pilot_sums(pilot_index, pilots.num_pilots(users))[:, pilot_index]
    coherent_all = (sharers * gains**2 / denom[:, np.newaxis, :]).sum(axis=0)
    desired = gains[cells, cells, :] ** 2 / denom[cells, :]

    coherent_per_antenna = (coherent_all - desired) / users
    noncoherent = gains.sum(axis=0) - coherent_all / users
    noise_term = config.noise_power / (users * transmit_power)
    return UserTerms(desired, np.maximum(coherent_per_antenna, 0.0), np.maximum(noncoherent, 0.0), noise_term)


def rate_terms(fading, pilots: PilotConfig, transmit_power: float, config: SystemConfig, n_antennas: int, cell: int, user: int, training_snr=None) -> RateTerms:
    """
    Closed-form terms S, phi_Q, phi_nQ, n of user `user` in cell `cell`.

    Args:
        fading (LargeScaleFading): Gains.
        pilots (PilotConfig): Pilot power and length.
        transmit_power (float): P_d in watts.
        config (SystemConfig): Scenario constants.
        n_antennas (int): N.
        cell (int): j.
        user (int): k.
        training_snr (float | None): Overrides P_d * B_p.

    Returns:
        RateTerms: Terms at N.
    """
    terms = user_terms(fading, pilots, transmit_power, config, training_snr)
    return RateTerms(
        desired=float(terms.desired[cell, user]),
        coherent=float(terms.coherent_per_antenna[cell, user] * n_antennas),
        noncoherent=float(terms.noncoherent[cell, user]),
        noise_term=float(terms.noise_term),
        n_antennas=n_antennas,
    )


def closed_form_sinr(terms: RateTerms, config: SystemConfig, pilots: PilotConfig, transmit_power: float, n_antennas=None) -> float:
    """SINR inside the log of the closed-form rate."""
    terms = terms.at(n_antennas) if n_antennas is not None else terms
    x = transmit_power * pilots.pilot_power
    signal = x * terms.n_antennas * terms.desired
    return signal / ((x * terms.phi + terms.noise_term) * config.users_per_cell)


def closed_form_rate(terms: RateTerms, config: SystemConfig, pilots: PilotConfig, transmit_power: float, n_antennas=None) -> float:
    """
    Closed-form achievable rate r = K b log2(1 + P_d B_p N S / ((P_d B_p phi + n) K)).

    Args:
        terms (RateTerms): Terms of the user.
        config (SystemConfig): Supplies K and b.
        pilots (PilotConfig): Supplies B_p.
        transmit_power (float): P_d in watts.
        n_antennas (int | None): N; defaults to `terms.n_antennas`.

    Returns:
        float: Rate in bits/s.
    """
    sinr = closed_form_sinr(terms, config, pilots, transmit_power, n_antennas)
    return config.users_per_cell * config.bandwidth * math.log2(1.0 + sinr)


def componentwise_rate(terms: RateTerms, config: SystemConfig, pilots: PilotConfig, transmit_power: float) -> float:
    """The same rate written term by term: numerator over P_d B_p phi_Q + P_d B_p phi_nQ + n."""
    x = transmit_power * pilots.pilot_power
    users = config.users_per_cell
    numerator = x * terms.n_antennas * terms.desired / users
    denominator = x * terms.coherent + x * terms.noncoherent + terms.noise_term
    return users * config.bandwidth * math.log2(1.0 + numerator / denominator)


@dataclass(frozen=True)
class PowerBreakdown:
    """Amplifier and circuit power of one BS."""

    pa_power: float
    circuit_power: float
    total: float
    theta: float


def total_power(transmit_power: float, pilots: PilotConfig, n_antennas: int, config: SystemConfig, power: PowerParams) -> PowerBreakdown:
    """
    Consumed power theta(N) / K (P_d + N B_p) + N p_c.

    Args:
        transmit_power (float): P_d in watts.
        pilots (PilotConfig): Supplies B_p.
        n_antennas (int): N.
        config (SystemConfig): Supplies K.
        power (PowerParams): Supplies p_c.

    Returns:
        PowerBreakdown: Components and total.
    """
    if transmit_power < 0 or n_antennas < 1:
        raise ValueError("transmit_power must be >= 0 and n_antennas >= 1")
    theta = papr_factor(n_antennas)
    pa_power = theta / config.users_per_cell * (transmit_power + n_antennas * pilots.pilot_power)
    circuit_power = n_antennas * power.circuit_per_antenna
    return PowerBreakdown(pa_power, circuit_power, pa_power + circuit_power, theta)


def ee_value(rate: float, power: PowerBreakdown) -> float:
    """Energy efficiency xi = rate / total power, bits/J."""
    if not power.total > 0:
        raise ValueError("total power must be > 0")
    return rate / power.total


class EnergyModel:
    """
    Closed-form rate / power / EE of a whole scenario.

    The network rate is the mean over all users of the per-user closed-form
    rate K b log2(1 + SINR_jk), i.e. the per-cell average sum rate. Power is
    per BS. Antenna counts may be arrays; transmit powers are scalars.

    Args:
        scenario (Scenario): Validated scenario.
        training_snr (float | None): Fixed training SNR; None ties it to
            P_d * B_p as the closed form does.
    """

    def __init__(self, scenario: Scenario, training_snr=None):
        self.scenario = scenario
        self.training_snr = training_snr
        self._terms_cache = {}

    @property
    def config(self) -> SystemConfig:
        return self.scenario.config

    @property
    def pilots(self) -> PilotConfig:
        return self.scenario.pilots

    @property
    def power_params(self) -> PowerParams:
        return self.scenario.power

    @property
    def fading(self):
        return self.scenario.fading

    def with_pilots(self, **changes) -> "EnergyModel":
        """A model with PilotConfig fields replaced, e.g. `pilot_length=8`."""
        scenario = self.scenario._replace(pilots=replace(self.pilots, **changes))
        return EnergyModel(scenario, self.training_snr)

    def with_power_params(self, **changes) -> "EnergyModel":
        """A model with PowerParams fields replaced, e.g. `rf_chain=2.0`."""
        changes.setdefault("circuit_per_antenna", None)
        scenario = self.scenario._replace(power=replace(self.power_params, **changes))
        return EnergyModel(scenario, self.training_snr)

    def terms(self, transmit_power: float) -> UserTerms:
        """Cached `user_terms` at P_d."""
        key = float(transmit_power)
        cached = self._terms_cache.get(key)
        if cached is None:
            if len(self._terms_cache) > 4096:
                self._terms_cache.clear()
            cached = user_terms(self.fading, self.pilots, key, self.config, self.training_snr)
            self._terms_cache[key] = cached
        return cached

    def user_rate_terms(self, n_antennas: int, transmit_power: float, cell: int, user: int) -> RateTerms:
        """RateTerms of one user from the cached arrays."""
        terms = self.terms(transmit_power)
        return RateTerms(
            desired=float(terms.desired[cell, user]),
            coherent=float(terms.coherent_per_antenna[cell, user] * n_antennas),
            noncoherent=float(terms.noncoherent[cell, user]),
            noise_term=float(terms.noise_term),
            n_antennas=int(n_antennas),
        )

    def sinr(self, n_antennas, transmit_power: float) -> np.ndarray:
        """Per-user SINR, shape n_antennas.shape + (L, K)."""
        n = np.asarray(n_antennas, dtype=float)[..., np.newaxis, np.newaxis]
        if transmit_power <= 0:
            return np.zeros(n.shape[:-2] + (self.config.num_cells, self.config.users_per_cell))
        terms = self.terms(transmit_power)
        x = transmit_power * self.pilots.pilot_power
        signal = x * n * terms.desired
        interference = x * (n * terms.coherent_per_antenna + terms.noncoherent) + terms.noise_term
        return signal / (interference * self.config.users_per_cell)

    def user_rates(self, n_antennas, transmit_power: float) -> np.ndarray:
        """Per-user closed-form rates K b log2(1 + SINR_jk)."""
        scale = self.config.users_per_cell * self.config.bandwidth
        return scale * np.log2(1.0 + self.sinr(n_antennas, transmit_power))

    def rate(self, n_antennas, transmit_power: float):
        """Network rate (bits/s): mean of the per-user rates."""
        rates = self.user_rates(n_antennas, transmit_power).mean(axis=(-2, -1))
        return float(rates) if np.ndim(rates) == 0 else rates

    def power(self, n_antennas, transmit_power: float):
        """Total consumed power per BS (watts)."""
        n = np.asarray(n_antennas, dtype=float)
        theta = papr_factor(n)
        total = theta / self.config.users_per_cell * (transmit_power + n * self.pilots.pilot_power)
        total = total + n * self.power_params.circuit_per_antenna
        return float(total) if np.ndim(total) == 0 else total

    def ee(self, n_antennas, transmit_power: float):
        """Energy efficiency (bits/J)."""
        return np.asarray(self.rate(n_antennas, transmit_power)) / np.asarray(self.power(n_antennas, transmit_power))

    def power_cap(self, n_antennas: int) -> float:
        """
        Largest P_d meeting the budget at N; negative when even P_d = 0 is over it.

        With theta(N) = 0 the amplifier term vanishes and P_d is capped by the
        budget itself.
        """
        budget = self.power_params.power_budget
        circuit = n_antennas * self.power_params.circuit_per_antenna
        theta = papr_factor(n_antennas)
        if theta == 0:
            return budget if circuit <= budget else -1.0
        return self.config.users_per_cell * (budget - circuit) / theta - n_antennas * self.pilots.pilot_power

    def feasible(self, n_antennas, transmit_power: float, rtol: float = 1e-9):
        """Antenna range, power budget and rate floor within a relative tolerance."""
        n = np.asarray(n_antennas)
        in_range = (n >= self.config.users_per_cell) & (n <= self.config.max_antennas)
        within_budget = np.asarray(self.power(n, transmit_power)) <= self.power_params.power_budget * (1.0 + rtol)
        floor = self.config.rate_floor
        meets_floor = np.asarray(self.rate(n, transmit_power)) >= floor * (1.0 - rtol)
        ok = in_range & within_budget & meets_floor & (transmit_power >= 0) & (self.pilots.pilot_power >= 0)
        return bool(ok) if ok.ndim == 0 else ok
