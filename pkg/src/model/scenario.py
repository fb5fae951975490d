"""
scenario.py
-----------
Scenario configuration types, the `key = value` scenario file codec and the
deterministic large-scale fading generator. Every other module consumes the
types defined here.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd

from common.config import (
    DEFAULT_GRID_SPACING_M,
    DEFAULT_NOISE_FIGURE_DB,
    DEFAULT_PATHLOSS_EXPONENT,
    MIN_DISTANCE_M,
    THERMAL_NOISE_DBM_PER_HZ,
)
from common.errors import ScenarioParseError, ScenarioValidationError
from common.storage import read_csv, write_csv

logger = logging.getLogger(__name__)


def db_to_watts(db: float, reference_w: float = 1.0) -> float:
    """Convert a level in dB relative to `reference_w` into watts."""
    return reference_w * 10.0 ** (db / 10.0)


def watts_to_db(watts: float, reference_w: float = 1.0) -> float:
    """Convert watts into dB relative to `reference_w`."""
    return 10.0 * math.log10(watts / reference_w)


def thermal_noise_power(bandwidth_hz: float, noise_figure_db: float = DEFAULT_NOISE_FIGURE_DB) -> float:
    """
    Thermal noise power over a bandwidth.

    Args:
        bandwidth_hz (float): Bandwidth b in Hz.
        noise_figure_db (float): Receiver noise figure in dB.

    Returns:
        float: Noise power in watts (-174 dBm/Hz + 10 log10 b + NF).
    """
    dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db
    return db_to_watts(dbm - 30.0)


@dataclass(frozen=True)
class SystemConfig:
    """
    Fixed parameters of a scenario.

    Attributes:
        num_cells (int): L.
        users_per_cell (int): K.
        max_antennas (int): M, upper bound of the antenna count N.
        bandwidth (float): b in Hz.
        noise_power (float): sigma2 in watts.
        rate_floor (float): r_min in bits/s.
        training_snr (float): SNR of the training phase (may be inf).
        reference_power_db (float): Reference transmit power in dB relative
            to `noise_power`, used by sweeps and figures.
    """

    num_cells: int
    users_per_cell: int
    max_antennas: int
    bandwidth: float
    noise_power: float
    rate_floor: float = 0.0
    training_snr: float = 1.0
    reference_power_db: float = 10.0

    def __post_init__(self):
        if self.num_cells < 1:
            raise ScenarioValidationError("cells", f"must be >= 1, got {self.num_cells}")
        if self.users_per_cell < 1:
            raise ScenarioValidationError("users", f"must be >= 1, got {self.users_per_cell}")
        if self.max_antennas < self.users_per_cell:
            raise ScenarioValidationError(
                "max_antennas",
                f"M={self.max_antennas} is below K={self.users_per_cell} (K <= N <= M)",
            )
        if not self.bandwidth > 0:
            raise ScenarioValidationError("bandwidth_hz", f"must be > 0, got {self.bandwidth}")
        if not (self.noise_power > 0 and math.isfinite(self.noise_power)):
            raise ScenarioValidationError("noise_power_w", f"must be finite and > 0, got {self.noise_power}")
        if not self.rate_floor >= 0:
            raise ScenarioValidationError("r_min_bps", f"must be >= 0, got {self.rate_floor}")
        if not self.training_snr > 0:
            raise ScenarioValidationError("training_snr", f"must be > 0, got {self.training_snr}")

    @property
    def reference_power(self) -> float:
        """Reference transmit power P_d in watts."""
        return db_to_watts(self.reference_power_db, self.noise_power)

    def antenna_range(self) -> np.ndarray:
        """All admissible antenna counts K..M."""
        return np.arange(self.users_per_cell, self.max_antennas + 1)


@dataclass(frozen=True)
class PilotConfig:
    """
    Pilot power and pilot sequence count.

    User k of every cell transmits pilot `k mod pilot_length`; with
    `pilot_length < K` users of one cell share sequences.
    """

    pilot_power: float
    pilot_length: int

    def __post_init__(self):
        if not (self.pilot_power >= 0 and math.isfinite(self.pilot_power)):
            raise ScenarioValidationError("pilot_power_w", f"must be finite and >= 0, got {self.pilot_power}")
        if self.pilot_length < 1:
            raise ScenarioValidationError("pilot_length", f"must be >= 1, got {self.pilot_length}")

    def pilot_indices(self, users_per_cell: int) -> np.ndarray:
        """Pilot index of each user slot k."""
        return np.arange(users_per_cell) % self.pilot_length

    def num_pilots(self, users_per_cell: int) -> int:
        """Number of distinct pilots actually in use."""
        return min(self.pilot_length, users_per_cell)


@dataclass(frozen=True)
class PowerParams:
    """
    Power-consumption parameters.

    `circuit_per_antenna` is always `baseband + rf_chain`; passing a
    different value is rejected.
    """

    baseband: float
    rf_chain: float
    power_budget: float
    circuit_per_antenna: Optional[float] = None

    def __post_init__(self):
        for name, value in (("p_bb_w", self.baseband), ("p_rf_w", self.rf_chain)):
            if not (value >= 0 and math.isfinite(value)):
                raise ScenarioValidationError(name, f"must be finite and >= 0, got {value}")
        if not self.power_budget > 0:
            raise ScenarioValidationError("p_max_w", f"must be > 0, got {self.power_budget}")
        p_c = self.baseband + self.rf_chain
        if self.circuit_per_antenna is None:
            object.__setattr__(self, "circuit_per_antenna", p_c)
        elif self.circuit_per_antenna != p_c:
            raise ScenarioValidationError(
                "p_c_w", f"{self.circuit_per_antenna} != p_bb + p_rf = {p_c}"
            )


@dataclass(frozen=True)
class LargeScaleFading:
    """
    Gain tensor F[l, j, k]: BS l to user k of cell j, linear scale.

    The array is stored read-only.
    """

    gains: np.ndarray = field(repr=False)

    def __post_init__(self):
        gains = np.array(self.gains, dtype=float)
        if gains.ndim != 3 or gains.shape[0] != gains.shape[1]:
            raise ScenarioParseError(f"fading tensor must have shape (L, L, K), got {gains.shape}")
        if not np.all(np.isfinite(gains)):
            raise ScenarioValidationError("gains", "entries must be finite")
        if np.any(gains < 0):
            raise ScenarioValidationError("gains", "entries must be >= 0")
        gains.setflags(write=False)
        object.__setattr__(self, "gains", gains)

    @property
    def num_cells(self) -> int:
        return self.gains.shape[0]

    @property
    def users_per_cell(self) -> int:
        return self.gains.shape[2]

    def serving(self) -> np.ndarray:
        """Serving gains F[j, j, k] as an (L, K) array."""
        cells = np.arange(self.num_cells)
        return self.gains[cells, cells, :]

    def pilot_sums(self, pilot_index: np.ndarray, num_pilots: int) -> np.ndarray:
        """
        Sum of gains seen by each BS over the users of each pilot.

        Args:
            pilot_index (np.ndarray): Pilot of each user slot, shape (K,).
            num_pilots (int): Number of pilots in use.

        Returns:
            np.ndarray: (L, P) array, entry [l, p] = sum over (j, k) with
            pilot p of F[l, j, k].
        """
        per_slot = self.gains.sum(axis=1)
        sums = np.zeros((self.num_cells, num_pilots))
        np.add.at(sums.T, pilot_index, per_slot.T)
        return sums

    def serving_dominates(self) -> bool:
        """True when every serving gain is at least every cross-cell gain."""
        return bool(np.all(self.serving()[np.newaxis, :, :] >= self.gains))


class Scenario(NamedTuple):
    """A validated scenario; unpacks as (config, pilots, power, fading)."""

    config: SystemConfig
    pilots: PilotConfig
    power: PowerParams
    fading: LargeScaleFading


def generate_fading(
    config: SystemConfig,
    spacing: float = DEFAULT_GRID_SPACING_M,
    pathloss_exponent: float = DEFAULT_PATHLOSS_EXPONENT,
    seed: int = 0,
    min_distance: float = MIN_DISTANCE_M,
) -> LargeScaleFading:
    """
    Drop users and compute distance-based gains on a square torus.

    BS l sits at the centre of its square cell on a grid with
    ceil(sqrt(L)) columns; users are uniform in their own cell, distances are
    toroidal and clipped to `min_distance`. F = (d / d0) ** -kappa.

    Args:
        config (SystemConfig): Supplies L and K.
        spacing (float): Cell side / BS spacing in meters.
        pathloss_exponent (float): kappa, must exceed 2.
        seed (int): Seed of the user drop.
        min_distance (float): d0 in meters.

    Returns:
        LargeScaleFading: Generated gains.
    """
    if not spacing > 0:
        raise ScenarioValidationError("grid_spacing_m", f"must be > 0, got {spacing}")
    if not pathloss_exponent > 2:
        raise ScenarioValidationError("pathloss_exponent", f"must be > 2, got {pathloss_exponent}")

    num_cells, users = config.num_cells, config.users_per_cell
    cols = math.ceil(math.sqrt(num_cells))
    rows = math.ceil(num_cells / cols)
    torus = np.array([cols * spacing, rows * spacing])

    cells = np.arange(num_cells)
    bs_xy = np.stack([cells % cols, cells // cols], axis=-1) * spacing

    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-spacing / 2.0, spacing / 2.0, size=(num_cells, users, 2))
    user_xy = bs_xy[:, np.newaxis, :] + offsets

    # delta[l, j, k] = user (j, k) minus BS l, wrapped onto the torus
    delta = np.abs(user_xy[np.newaxis, :, :, :] - bs_xy[:, np.newaxis, np.newaxis, :]) % torus
    delta = np.minimum(delta, torus - delta)
    distance = np.maximum(np.hypot(delta[..., 0], delta[..., 1]), min_distance)

    fading = LargeScaleFading((distance / min_distance) ** (-pathloss_exponent))
    logger.debug(f"Generated fading for L={num_cells}, K={users}, seed={seed}")
    return fading


_INT_KEYS = {"cells", "users", "max_antennas", "pilot_length", "seed"}
_FLOAT_KEYS = {
    "bandwidth_hz", "noise_power_w", "noise_figure_db", "pilot_power_w", "p_bb_w",
    "p_rf_w", "p_c_w", "p_max_w", "r_min_bps", "training_snr", "grid_spacing_m",
    "pathloss_exponent", "transmit_power_db",
}
_STR_KEYS = {"fading_file"}
_REQUIRED = (
    "cells", "users", "max_antennas", "bandwidth_hz", "pilot_power_w",
    "pilot_length", "p_bb_w", "p_rf_w", "p_max_w",
)


def parse_scenario_text(text: str) -> dict:
    """
    Parse the flat `key = value` format.

    Args:
        text (str): File contents.

    Returns:
        dict: Typed values keyed by scenario key.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioParseError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ScenarioParseError("duplicate key", line=lineno, key=key)
        if not value:
            raise ScenarioParseError("missing value", line=lineno, key=key)
        try:
            if key in _INT_KEYS:
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            elif key in _STR_KEYS:
                values[key] = value
            else:
                raise ScenarioParseError("unknown key", line=lineno, key=key)
        except ValueError as exc:
            if isinstance(exc, ScenarioParseError):
                raise
            raise ScenarioParseError(f"cannot convert '{value}'", line=lineno, key=key) from exc
    missing = [key for key in _REQUIRED if key not in values]
    if missing:
        raise ScenarioParseError(f"missing required keys: {', '.join(missing)}")
    return values


def load_fading_csv(path, config: SystemConfig) -> LargeScaleFading:
    """
    Read a fading CSV with rows `l,j,k,gain` (header row `l,j,k,gain`).

    Args:
        path (str | Path): CSV file.
        config (SystemConfig): Supplies the expected L and K.

    Returns:
        LargeScaleFading: The explicit tensor.
    """
    try:
        df = read_csv(path, comment="#")
    except Exception as exc:
        raise ScenarioParseError(f"cannot read fading file '{path}': {exc}", key="fading_file") from exc
    if list(df.columns) != ["l", "j", "k", "gain"]:
        raise ScenarioParseError(f"fading file header must be l,j,k,gain, got {list(df.columns)}", key="fading_file")

    num_cells, users = config.num_cells, config.users_per_cell
    expected = num_cells * num_cells * users
    if len(df) != expected:
        raise ScenarioParseError(
            f"fading file has {len(df)} rows, expected L*L*K = {expected}", key="fading_file"
        )
    try:
        index = df[["l", "j", "k"]].astype(int).to_numpy()
        gain = pd.to_numeric(df["gain"]).to_numpy(dtype=float)
    except (ValueError, TypeError) as exc:
        raise ScenarioParseError(f"non-numeric entry in fading file: {exc}", key="fading_file") from exc
    bounds = np.array([num_cells, num_cells, users])
    if np.any(index < 0) or np.any(index >= bounds):
        raise ScenarioParseError("fading index out of range", key="fading_file")

    gains = np.full((num_cells, num_cells, users), np.nan)
    gains[index[:, 0], index[:, 1], index[:, 2]] = gain
    if np.isnan(gains).any() and not np.isnan(gain).any():
        raise ScenarioParseError("duplicate (l, j, k) rows in fading file", key="fading_file")
    return LargeScaleFading(gains)


def build_scenario(values: dict, base_dir=None) -> Scenario:
    """
    Turn parsed scenario values into validated types.

    Args:
        values (dict): Output of `parse_scenario_text`.
        base_dir (Path | None): Directory that relative `fading_file` paths
            resolve against.

    Returns:
        Scenario: The validated scenario.
    """
    bandwidth = values["bandwidth_hz"]
    if "noise_power_w" in values:
        noise_power = values["noise_power_w"]
    else:
        if not bandwidth > 0:
            raise ScenarioValidationError("bandwidth_hz", f"must be > 0, got {bandwidth}")
        noise_power = thermal_noise_power(bandwidth, values.get("noise_figure_db", DEFAULT_NOISE_FIGURE_DB))

    pilots = PilotConfig(pilot_power=values["pilot_power_w"], pilot_length=values["pilot_length"])
    # PilotConfig allows B_p = 0; the rate model needs P_d B_p > 0
    if pilots.pilot_power == 0:
        raise ScenarioValidationError("pilot_power_w", "must be > 0 in a scenario, the rate model needs P_d B_p > 0")
    if "training_snr" in values:
        training_snr = values["training_snr"]
    elif noise_power > 0 and pilots.pilot_power > 0:
        training_snr = pilots.pilot_power * pilots.pilot_length / noise_power
    else:
        training_snr = math.inf

    config = SystemConfig(
        num_cells=values["cells"],
        users_per_cell=values["users"],
        max_antennas=values["max_antennas"],
        bandwidth=bandwidth,
        noise_power=noise_power,
        rate_floor=values.get("r_min_bps", 0.0),
        training_snr=training_snr,
        reference_power_db=values.get("transmit_power_db", 10.0),
    )
    power = PowerParams(
        baseband=values["p_bb_w"],
        rf_chain=values["p_rf_w"],
        power_budget=values["p_max_w"],
        circuit_per_antenna=values.get("p_c_w"),
    )

    if "fading_file" in values:
        fading_path = Path(values["fading_file"])
        if not fading_path.is_absolute() and base_dir is not None:
            fading_path = Path(base_dir) / fading_path
        fading = load_fading_csv(fading_path, config)
    else:
        fading = generate_fading(
            config,
            spacing=values.get("grid_spacing_m", DEFAULT_GRID_SPACING_M),
            pathloss_exponent=values.get("pathloss_exponent", DEFAULT_PATHLOSS_EXPONENT),
            seed=values.get("seed", 0),
        )
    if fading.gains.shape != (config.num_cells, config.num_cells, config.users_per_cell):
        raise ScenarioParseError(
            f"fading shape {fading.gains.shape} does not match (L, L, K)", key="fading_file"
        )
    return Scenario(config, pilots, power, fading)


def load_scenario(path) -> Scenario:
    """
    Load and validate a scenario file.

    Args:
        path (str | Path): Scenario file.

    Returns:
        Scenario: (config, pilots, power, fading).
    """
    scenario_path = Path(path)
    logger.info(f"Loading scenario from {scenario_path}")
    try:
        text = scenario_path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario file '{scenario_path}': {exc}") from exc
    scenario = build_scenario(parse_scenario_text(text), base_dir=scenario_path.parent)
    logger.info(
        f"Scenario loaded: L={scenario.config.num_cells}, K={scenario.config.users_per_cell}, "
        f"M={scenario.config.max_antennas}, tau_p={scenario.pilots.pilot_length}"
    )
    return scenario


def save_scenario(scenario: Scenario, path) -> Path:
    """
    Write a scenario file plus a sibling fading CSV.

    Floats are written with `repr`, so loading the result reproduces every
    value bit for bit.

    Args:
        scenario (Scenario): Scenario to write.
        path (str | Path): Target scenario file.

    Returns:
        Path: The scenario file.
    """
    config, pilots, power, fading = scenario
    target = Path(path)
    fading_path = target.with_name(target.stem + "_fading.csv")

    lines = [
        "# scenario written by save_scenario",
        f"cells = {config.num_cells}",
        f"users = {config.users_per_cell}",
        f"max_antennas = {config.max_antennas}",
        f"bandwidth_hz = {config.bandwidth!r}",
        f"noise_power_w = {config.noise_power!r}",
        f"pilot_power_w = {pilots.pilot_power!r}",
        f"pilot_length = {pilots.pilot_length}",
        f"p_bb_w = {power.baseband!r}",
        f"p_rf_w = {power.rf_chain!r}",
        f"p_max_w = {power.power_budget!r}",
        f"r_min_bps = {config.rate_floor!r}",
        f"training_snr = {config.training_snr!r}",
        f"transmit_power_db = {config.reference_power_db!r}",
        f"fading_file = {fading_path.name}",
    ]
    l_idx, j_idx, k_idx = np.indices(fading.gains.shape).reshape(3, -1)
    rows = pd.DataFrame({"l": l_idx, "j": j_idx, "k": k_idx, "gain": fading.gains.reshape(-1)})
    write_csv(rows, fading_path)
    target.write_text("\n".join(lines) + "\n")
    logger.info(f"Saved scenario to {target}")
    return target
