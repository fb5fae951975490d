"""
channel_mc.py
-------------
Monte Carlo oracle for the MRT downlink: draws small-scale fading, forms the
MMSE channel estimates and unit-norm MRT precoders, and measures the
desired-signal (DS) and unknown-part (UN) powers by sample means.

Trials are split into blocks; block b draws from the counter-based substream
`SeedSequence(seed, spawn_key=(b,))`, and block sums are reduced in block
order, so results do not depend on the worker count.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import gammaln

from common.config import EE_MC_BLOCK_SIZE, EE_THREADS
from common.errors import ChannelError
from model.scenario import LargeScaleFading, PilotConfig, SystemConfig

logger = logging.getLogger(__name__)

MIN_TRIALS = 100


@dataclass(frozen=True)
class ChannelRealization:
    """
    A batch of channel draws.

    Axes: t = trial, l = BS, j = cell of the user, k = user slot, n = antenna.

    Attributes:
        small_scale (np.ndarray): g[t, l, j, k, n], unit-variance CN entries.
        channels (np.ndarray): h = sqrt(F[l, j, k]) g.
        training_noise (np.ndarray): Unit-variance noise m[t, l, p, n] of the
            training phase; pilot p uses row p.
        estimates (np.ndarray | None): h_hat[t, l, k, n] of the serving links.
        training_obs (np.ndarray | None): Normalised observation w[t, l, p, n].
        precoders (np.ndarray | None): q[t, l, k, n], unit norm.
    """

    small_scale: np.ndarray = field(repr=False)
    channels: np.ndarray = field(repr=False)
    training_noise: np.ndarray = field(repr=False)
    estimates: Optional[np.ndarray] = field(default=None, repr=False)
    training_obs: Optional[np.ndarray] = field(default=None, repr=False)
    precoders: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def trials(self) -> int:
        return self.channels.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.channels.shape[-1]


@dataclass(frozen=True)
class EmpiricalSinr:
    """
    Monte Carlo DS / UN estimates of every user, arrays of shape (L, K).

    Attributes:
        ds_power (np.ndarray): Desired-signal power.
        un_power (np.ndarray): Unknown-part power (interference, estimation
            error, contamination and noise).
        sinr (np.ndarray): ds_power / un_power.
        trials (int): Number of realizations.
        std_err (np.ndarray): Standard error of `sinr`.
        ds_stderr (np.ndarray): Standard error of `ds_power`.
    """

    ds_power: np.ndarray
    un_power: np.ndarray
    sinr: np.ndarray
    trials: int
    std_err: np.ndarray
    ds_stderr: np.ndarray

    def user(self, cell: int, user: int) -> dict:
        """Scalar figures of user (cell, user)."""
        return {
            "ds_power": float(self.ds_power[cell, user]),
            "un_power": float(self.un_power[cell, user]),
            "sinr": float(self.sinr[cell, user]),
            "std_err": float(self.std_err[cell, user]),
            "ds_stderr": float(self.ds_stderr[cell, user]),
            "trials": self.trials,
        }


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _draw(rng: np.random.Generator, fading: LargeScaleFading, n_antennas: int, trials: int) -> ChannelRealization:
    cells, users = fading.num_cells, fading.users_per_cell
    small_scale = _complex_normal(rng, (trials, cells, cells, users, n_antennas))
    channels = np.sqrt(fading.gains)[np.newaxis, ..., np.newaxis] * small_scale
    training_noise = _complex_normal(rng, (trials, cells, users, n_antennas))
    return ChannelRealization(small_scale, channels, training_noise)


def _check_antennas(config: SystemConfig, n_antennas: int) -> None:
    if not config.users_per_cell <= n_antennas <= config.max_antennas:
        raise ChannelError(
            f"n_antennas={n_antennas} outside [K, M] = [{config.users_per_cell}, {config.max_antennas}]"
        )


def draw_channels(config: SystemConfig, fading: LargeScaleFading, n_antennas: int, seed: int, trials: int = 1) -> ChannelRealization:
    """
    Draw `trials` independent channel realizations.

    Args:
        config (SystemConfig): Supplies the antenna bounds.
        fading (LargeScaleFading): Gains F.
        n_antennas (int): N, within [K, M].
        seed (int): Master seed; the same seed gives identical arrays.
        trials (int): Number of realizations along the leading axis.

    Returns:
        ChannelRealization: Channels and training noise.
    """
    _check_antennas(config, n_antennas)
    if trials < 1:
        raise ChannelError(f"trials must be >= 1, got {trials}")
    return _draw(np.random.default_rng(seed), fading, n_antennas, trials)


def mmse_covariance(fading: LargeScaleFading, training_snr: float, cell: int, user: int, pilots: Optional[PilotConfig] = None) -> float:
    """
    Per-antenna variance Psi of the MMSE estimate of the serving link.

    Psi = F[j, j, k]^2 / (1 / snr + sum of BS j's gains over the pilot
    sharers of (j, k)). Without `pilots` the sharers are user k of every cell.

    Args:
        fading (LargeScaleFading): Gains.
        training_snr (float): Training SNR, > 0; inf means noiseless.
        cell (int): j.
        user (int): k.
        pilots (PilotConfig | None): Pilot grouping.

    Returns:
        float: Psi in [0, F[j, j, k]].
    """
    if not training_snr > 0:
        raise ChannelError(f"training_snr must be > 0, got {training_snr}")
    if pilots is None:
        contamination = fading.gains[cell, :, user].sum()
    else:
        users = fading.users_per_cell
        pilot_index = pilots.pilot_indices(users)
        sums = fading.pilot_sums(pilot_index, pilots.num_pilots(users))
        contamination = sums[cell, pilot_index[user]]
    denom = 1.0 / training_snr + contamination
    serving = fading.gains[cell, cell, user]
    return float(serving**2 / denom) if denom > 0 else 0.0


def mmse_estimate(realization: ChannelRealization, fading: LargeScaleFading, pilots: PilotConfig, training_snr: float) -> ChannelRealization:
    """
    MMSE estimates of the serving channels from the training phase.

    The normalised observation of pilot p at BS l is the sum of the channels
    of every user on p plus the training noise scaled by 1/sqrt(snr). The
    estimate of h[l, l, k] is F[l, l, k] / (1/snr + sum of sharer gains) times
    the observation of k's pilot.

    Args:
        realization (ChannelRealization): Drawn channels.
        fading (LargeScaleFading): Gains used for the drawing.
        pilots (PilotConfig): Pilot grouping.
        training_snr (float): Training SNR, > 0; inf means noiseless.

    Returns:
        ChannelRealization: Copy with `estimates`, `training_obs` and the
        MRT `precoders` set.

    Raises:
        ChannelError: A serving gain is zero, so its estimate vanishes.
    """
    if not training_snr > 0:
        raise ChannelError(f"training_snr must be > 0, got {training_snr}")
    users = fading.users_per_cell
    num_pilots = pilots.num_pilots(users)
    pilot_index = pilots.pilot_indices(users)
    assignment = np.zeros((users, num_pilots))
    assignment[np.arange(users), pilot_index] = 1.0

    on_pilot = np.einsum("tljkn,kp->tlpn", realization.channels, assignment)
    noise_scale = 0.0 if math.isinf(training_snr) else 1.0 / math.sqrt(training_snr)
    observation = on_pilot + noise_scale * realization.training_noise[:, :, :num_pilots, :]

    cells = np.arange(fading.num_cells)
    denom = 1.0 / training_snr + fading.pilot_sums(pilot_index, num_pilots)[:, pilot_index]
    serving = fading.gains[cells, cells, :]
    coefficient = np.divide(serving, denom, out=np.zeros_like(serving), where=denom > 0)
    estimates = coefficient[np.newaxis, :, :, np.newaxis] * observation[:, :, pilot_index, :]
    return replace(realization, estimates=estimates, training_obs=observation, precoders=mrt_precoder(estimates))


def mrt_precoder(h_hat: np.ndarray) -> np.ndarray:
    """
    Unit-norm MRT precoder q = h_hat / ||h_hat|| along the last axis.

    Args:
        h_hat (np.ndarray): Estimate vector or batch of vectors.

    Returns:
        np.ndarray: Precoders of the same shape.
    """
    h_hat = np.asarray(h_hat)
    norms = np.linalg.norm(h_hat, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ChannelError("cannot form an MRT precoder from a zero estimate")
    return h_hat / norms


def _block_sums(rng, fading, pilots, n_antennas, trials, training_snr):
    realization = mmse_estimate(_draw(rng, fading, n_antennas, trials), fading, pilots, training_snr)
    precoders = realization.precoders
    cells, users = fading.num_cells, fading.users_per_cell

    # gains[t, l, j, k, i] = h[t, l, j, k]^H q[t, l, i]
    lhs = realization.channels.conj().reshape(trials * cells, cells * users, n_antennas)
    rhs = np.swapaxes(precoders, -1, -2).reshape(trials * cells, n_antennas, users)
    gains = (lhs @ rhs).reshape(trials, cells, cells, users, users)

    idx = np.arange(cells)
    slots = np.arange(users)
    serve = gains[:, idx, idx][:, :, slots, slots]
    received = (np.abs(gains) ** 2).sum(axis=(1, 4))
    return serve.sum(axis=0), (np.abs(serve) ** 2).sum(axis=0), received.sum(axis=0)


def empirical_sinr(
    config: SystemConfig,
    fading: LargeScaleFading,
    pilots: PilotConfig,
    transmit_power: float,
    n_antennas: int,
    trials: int,
    seed: int = 0,
    training_snr: Optional[float] = None,
    threads: Optional[int] = None,
    block_size: Optional[int] = None,
) -> EmpiricalSinr:
    """
    Estimate DS, UN and SINR of every user by Monte Carlo.

    Each user radiates B_p P_d / K; receiver noise enters UN as
    sigma2 / (K P_d). DS = P |E[h^H q]|^2 and UN = P (E[sum |h^H q_li|^2]
    - |E[h^H q]|^2) + noise, expectations replaced by sample means.

    The noise is a normalisation choice: UN carries the closed form's
    n = sigma2 / (K P_d) rather than the physical sigma2, so both share one
    noise convention and the comparison exercises the channel terms only.

    Args:
        config (SystemConfig): Scenario constants.
        fading (LargeScaleFading): Gains.
        pilots (PilotConfig): Pilot power and length.
        transmit_power (float): P_d in watts, >= 0.
        n_antennas (int): N within [K, M].
        trials (int): Realizations, >= 100.
        seed (int): Master seed.
        training_snr (float | None): Overrides the P_d B_p training SNR.
        threads (int | None): Worker count; defaults to `EE_THREADS`.
        block_size (int | None): Trials per substream; defaults to
            `EE_MC_BLOCK_SIZE`.

    Returns:
        EmpiricalSinr: Per-user estimates.
    """
    if trials < MIN_TRIALS:
        raise ChannelError(f"trials must be >= {MIN_TRIALS}, got {trials}")
    _check_antennas(config, n_antennas)
    if transmit_power < 0:
        raise ChannelError(f"transmit_power must be >= 0, got {transmit_power}")

    shape = (fading.num_cells, fading.users_per_cell)
    if transmit_power == 0:
        zeros = np.zeros(shape)
        return EmpiricalSinr(zeros, np.full(shape, np.inf), zeros, trials, zeros, zeros)

    snr = transmit_power * pilots.pilot_power if training_snr is None else training_snr
    if not snr > 0:
        raise ChannelError("training SNR must be > 0; pilot_power is zero")
    per_user_power = transmit_power * pilots.pilot_power / config.users_per_cell
    noise = config.noise_power / (config.users_per_cell * transmit_power)

    block_size = block_size or EE_MC_BLOCK_SIZE
    sizes = [min(block_size, trials - start) for start in range(0, trials, block_size)]

    def run_block(block):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
        return _block_sums(rng, fading, pilots, n_antennas, sizes[block], snr)

    workers = max(1, min(threads or EE_THREADS, len(sizes)))
    logger.debug(f"Monte Carlo: {trials} trials in {len(sizes)} blocks on {workers} threads (N={n_antennas})")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run_block, range(len(sizes))))

    serve_sum = np.zeros(shape, dtype=complex)
    serve_abs2 = np.zeros(shape)
    received = np.zeros(shape)
    for block_serve, block_abs2, block_received in results:
        serve_sum += block_serve
        serve_abs2 += block_abs2
        received += block_received

    mean_serve = serve_sum / trials
    coherent = np.abs(mean_serve) ** 2
    variance = np.maximum(serve_abs2 / trials - coherent, 0.0)

    ds_power = per_user_power * coherent
    un_power = per_user_power * (received / trials - coherent) + noise
    sinr = ds_power / un_power
    ds_stderr = 2.0 * per_user_power * np.abs(mean_serve) * np.sqrt(variance / trials)
    return EmpiricalSinr(ds_power, un_power, sinr, trials, ds_stderr / un_power, ds_stderr)


def expected_desired_power(estimate_variance, n_antennas, per_user_power: float):
    """
    Exact DS of unit-norm MRT: P Psi (Gamma(N + 1/2) / Gamma(N))^2.

    The closed form uses P Psi N, which exceeds this by about P Psi / 4.
    """
    n = np.asarray(n_antennas, dtype=float)
    return per_user_power * np.asarray(estimate_variance) * np.exp(2.0 * (gammaln(n + 0.5) - gammaln(n)))
