r"""Physical scenario: node placement, link budgets, and the config schema.

The base station ``S`` sits at the origin of a 2-D plane (elevation is
fixed to zero everywhere).  The surface ``R``, the legitimate users
``D_k`` and the sensed targets ``T_l`` are placed on circles centred on
``S``; a circle is described by its radius (range from ``S``) and the
azimuth of the node on it.  Distances between any pair of nodes follow
from the Cartesian coordinates, while the azimuths entering steering
vectors are the bearings seen from ``S`` (the surface is deployed
broadside to the base station, and the model reuses the same azimuth
for both ends of a link).

Every config key has a default matching the reference setup; a config
is a flat mapping and unknown keys are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

BOLTZMANN = 1.380649e-23  # J/K

# ---------------------------------------------------------------------------
# unit helpers


def db_to_linear(x_db: float) -> float:
    """Convert a dB value to linear scale."""
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    """Convert a positive linear value to dB."""
    return 10.0 * math.log10(x)


def dbm_to_watt(x_dbm: float) -> float:
    """Convert a dBm power level to watts."""
    return 10.0 ** (x_dbm / 10.0) * 1e-3


def watt_to_dbm(x_w: float) -> float:
    """Convert a power in watts to dBm."""
    return 10.0 * math.log10(x_w * 1e3)


def noise_power(temperature_k: float, bandwidth_hz: float, noise_figure: float) -> float:
    """Thermal noise power ``k_B * T * B * F`` in watts (all inputs linear)."""
    if temperature_k <= 0 or bandwidth_hz <= 0 or noise_figure <= 0:
        raise ValueError("temperature, bandwidth and noise figure must be positive")
    return BOLTZMANN * temperature_k * bandwidth_hz * noise_figure


# ---------------------------------------------------------------------------
# config schema

#: Default configuration.  ``None`` marks values derived from other keys
#: (spacings default to half a wavelength, weights to uniform).
DEFAULT_CONFIG: dict = {
    # geometry / hardware
    "lambda_m": 0.05,            # carrier wavelength
    "J_T": 12,                   # transmit antennas at S
    "J_R": 6,                    # receive antennas at S (echo path, unused here)
    "M_a": 8,                    # surface elements, vertical
    "M_b": 8,                    # surface elements, horizontal
    "rho_R_m": None,             # surface element spacing (default lambda/2)
    "rho_S_m": None,             # BS antenna spacing (default lambda/2)
    "K": 2,                      # number of legitimate users
    "L": 2,                      # number of sensed targets / eavesdroppers
    "d_SR_m": 22.0,              # range S -> R
    "phi_SR_deg": -40.0,         # azimuth of R seen from S
    "d_SD_m": 30.0,              # user circle radius
    "phi_SD_deg_min": -15.0,     # user azimuths, equidistant in this interval
    "phi_SD_deg_max": 5.0,
    "d_ST_m_min": 16.0,          # target ranges, equidistant in this interval
    "d_ST_m_max": 20.0,
    "phi_ST_deg": -20.0,         # common target azimuth
    "target_offset_x_m": None,   # if set: target l at (x_Dl + offset, y_Dl)
    # link budget
    "G_S_T_dBi": 25.0,           # BS transmit antenna gain
    "G_omega_R_dBi": 12.0,       # user/target receive antenna gain
    "K_SR_dB": 10.0,             # Rician factor, S -> R
    "K_RD_dB": 10.0,             # Rician factor, R -> users
    "sigma_RCS_dBsm": 10.0,      # target radar cross-section
    "P_S_dBm": 25.0,             # transmit power budget
    "T_K": 298.0,                # receiver temperature
    "B_Hz": 50e6,                # bandwidth
    "N_F_dB": 5.0,               # noise figure
    # quality-of-service targets
    "gamma_D_min_dB": 16.0,      # min SINR per legitimate user
    "gamma_T_max_dB": 5.0,       # max SINR leaked to any target
    "alpha": None,               # per-target objective weights (default uniform)
    # optimizer knobs (consumed by risac.ao)
    "G_it": 30,                  # outer alternating iterations
    "N_it": 100,                 # inner manifold descent steps
    "grad_tol": 1e-6,            # inner gradient-norm stopping tolerance
    "armijo_c": 1e-4,            # sufficient-decrease constant
    "armijo_shrink": 0.5,        # backtracking contraction factor
    "armijo_init_step": 1.0,     # first trial step
    "dual_step": 0.1,            # multiplier correction step (normalized units)
    "dual_init": 1.0,            # scale on the initial multiplier prices
    "plateau_rel": 0.01,         # relative objective change counted as flat
    "plateau_len": 3,            # consecutive flat steps declaring a plateau
    "early_stop": True,          # stop the outer loop at the plateau
}

_INT_KEYS = {"J_T", "J_R", "M_a", "M_b", "K", "L", "G_it", "N_it", "plateau_len"}
_BOOL_KEYS = {"early_stop"}
_OPTIONAL_KEYS = {"rho_R_m", "rho_S_m", "alpha", "target_offset_x_m"}


class ConfigError(ValueError):
    """A config file or override mapping violates the schema."""


def resolve_config(overrides: dict | None = None) -> dict:
    """Merge ``overrides`` into the defaults, validating keys and types."""
    cfg = dict(DEFAULT_CONFIG)
    for key, value in (overrides or {}).items():
        if key not in DEFAULT_CONFIG:
            raise ConfigError(f"unknown config key: {key!r}")
        cfg[key] = value
    for key in _INT_KEYS:
        try:
            cfg[key] = int(cfg[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r} must be an integer") from exc
    for key in _BOOL_KEYS:
        if isinstance(cfg[key], str):
            cfg[key] = cfg[key].strip().lower() in {"1", "true", "yes", "on"}
        else:
            cfg[key] = bool(cfg[key])
    for key, value in cfg.items():
        if key in _INT_KEYS | _BOOL_KEYS or key == "alpha":
            continue
        if value is None:
            if key in _OPTIONAL_KEYS:
                continue
            raise ConfigError(f"config key {key!r} must not be null")
        try:
            cfg[key] = float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r} must be a number") from exc
    if cfg["alpha"] is not None:
        try:
            cfg["alpha"] = [float(a) for a in np.atleast_1d(cfg["alpha"])]
        except (TypeError, ValueError) as exc:
            raise ConfigError("config key 'alpha' must be a list of numbers") from exc
    return cfg


def load_config(path: str) -> dict:
    """Parse a flat ``key = value`` text file into an override mapping.

    Blank lines and ``#`` comments are ignored; values are parsed as
    JSON where possible (numbers, lists, booleans) and kept as strings
    otherwise.
    """
    overrides: dict = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            try:
                overrides[key.strip()] = json.loads(value.strip())
            except json.JSONDecodeError:
                overrides[key.strip()] = value.strip()
    return overrides


# ---------------------------------------------------------------------------
# scenario construction


@dataclass(frozen=True)
class Scenario:
    """Immutable physical scenario: geometry, link budget, targets of merit.

    All stored quantities are linear scale and SI units (meters, watts,
    radians); dB conversions happen only at the reporting layer.
    """

    wavelength: float
    n_tx: int                    # BS transmit antennas
    n_rx: int                    # BS receive antennas (unused echo path)
    m_a: int                     # surface rows
    m_b: int                     # surface columns
    spacing_ris: float           # surface element spacing, meters
    spacing_bs: float            # BS antenna spacing, meters
    n_users: int
    n_targets: int
    pos_ris: np.ndarray          # (2,) Cartesian, meters
    pos_users: np.ndarray        # (K, 2)
    pos_targets: np.ndarray      # (L, 2)
    az_ris: float                # bearings from S, radians
    az_users: np.ndarray         # (K,)
    az_targets: np.ndarray       # (L,)
    d_sr: float
    d_s_user: np.ndarray         # (K,)
    d_s_target: np.ndarray       # (L,)
    d_r_user: np.ndarray         # (K,)
    d_r_target: np.ndarray       # (L,)
    gain_tx: float               # BS transmit antenna gain, linear
    gain_rx: float               # user/target receive gain, linear
    rician_bs_ris: float         # linear Rician factor, S -> R
    rician_ris_user: float       # linear Rician factor, R -> D_k
    rcs: np.ndarray              # (L,) radar cross-sections, m^2
    power_budget: float          # watts
    noise_w: float               # watts
    gamma_user_min: float        # linear SINR floor per user
    gamma_eaves_max: float       # linear SINR cap per target
    weights: np.ndarray          # (L,) objective weights, sum to 1
    temperature: float
    bandwidth: float
    noise_figure: float          # linear
    config: dict = field(repr=False)

    @property
    def n_elems(self) -> int:
        """Total surface element count."""
        return self.m_a * self.m_b

    @property
    def secrecy_floor(self) -> float:
        """Guaranteed secrecy capacity when both SINR targets are met."""
        return math.log2(1.0 + self.gamma_user_min) - math.log2(1.0 + self.gamma_eaves_max)


def _equidistant(lo: float, hi: float, n: int) -> np.ndarray:
    """n points equidistant in [lo, hi]; a single point sits at the midpoint."""
    if n == 1:
        return np.array([(lo + hi) / 2.0])
    return np.linspace(lo, hi, n)


def build_scenario(config: dict | None = None) -> Scenario:
    """Build a :class:`Scenario` from a config mapping (defaults applied).

    Raises :class:`ConfigError` on schema violations, nonpositive counts
    or distances, weight vectors that do not sum to one, or nodes closer
    than a millimeter to each other.
    """
    cfg = resolve_config(config)

    n_users, n_targets = cfg["K"], cfg["L"]
    if n_users <= 0 or n_targets <= 0:
        raise ConfigError("K and L must be positive")
    if cfg["M_a"] <= 0 or cfg["M_b"] <= 0 or cfg["J_T"] <= 0:
        raise ConfigError("antenna and element counts must be positive")
    for key in ("lambda_m", "d_SR_m", "d_SD_m", "d_ST_m_min", "d_ST_m_max"):
        if cfg[key] <= 0:
            raise ConfigError(f"{key} must be positive")

    wavelength = cfg["lambda_m"]
    spacing_ris = cfg["rho_R_m"] if cfg["rho_R_m"] is not None else wavelength / 2.0
    spacing_bs = cfg["rho_S_m"] if cfg["rho_S_m"] is not None else wavelength / 2.0

    weights = cfg["alpha"]
    if weights is None:
        weights = np.full(n_targets, 1.0 / n_targets)
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (n_targets,):
            raise ConfigError(f"alpha must have L = {n_targets} entries")
        if abs(float(weights.sum()) - 1.0) > 1e-12:
            raise ConfigError("alpha must sum to 1")
        if np.any(weights < 0):
            raise ConfigError("alpha entries must be nonnegative")

    az_ris = math.radians(cfg["phi_SR_deg"])
    az_users = np.radians(
        _equidistant(cfg["phi_SD_deg_min"], cfg["phi_SD_deg_max"], n_users)
    )
    pos_ris = cfg["d_SR_m"] * np.array([math.cos(az_ris), math.sin(az_ris)])
    pos_users = cfg["d_SD_m"] * np.stack([np.cos(az_users), np.sin(az_users)], axis=1)

    if cfg["target_offset_x_m"] is not None:
        # targets shadow the users: same y, shifted x (requires L <= K)
        if n_targets > n_users:
            raise ConfigError("target_offset_x_m placement requires L <= K")
        pos_targets = pos_users[:n_targets].copy()
        pos_targets[:, 0] += cfg["target_offset_x_m"]
        az_targets = np.arctan2(pos_targets[:, 1], pos_targets[:, 0])
        d_s_target = np.linalg.norm(pos_targets, axis=1)
    else:
        d_s_target = _equidistant(cfg["d_ST_m_min"], cfg["d_ST_m_max"], n_targets)
        az_targets = np.full(n_targets, math.radians(cfg["phi_ST_deg"]))
        pos_targets = d_s_target[:, None] * np.stack(
            [np.cos(az_targets), np.sin(az_targets)], axis=1
        )

    nodes = np.concatenate([np.zeros((1, 2)), pos_ris[None, :], pos_users, pos_targets])
    for i in range(len(nodes)):
        for j in range(i + 1, len(nodes)):
            if np.linalg.norm(nodes[i] - nodes[j]) < 1e-3:
                raise ConfigError("two nodes are closer than 1e-3 m")

    d_s_user = np.linalg.norm(pos_users, axis=1)
    d_r_user = np.linalg.norm(pos_users - pos_ris, axis=1)
    d_r_target = np.linalg.norm(pos_targets - pos_ris, axis=1)

    return Scenario(
        wavelength=wavelength,
        n_tx=cfg["J_T"],
        n_rx=cfg["J_R"],
        m_a=cfg["M_a"],
        m_b=cfg["M_b"],
        spacing_ris=spacing_ris,
        spacing_bs=spacing_bs,
        n_users=n_users,
        n_targets=n_targets,
        pos_ris=pos_ris,
        pos_users=pos_users,
        pos_targets=pos_targets,
        az_ris=az_ris,
        az_users=az_users,
        az_targets=az_targets,
        d_sr=cfg["d_SR_m"],
        d_s_user=d_s_user,
        d_s_target=np.asarray(d_s_target, dtype=float),
        d_r_user=d_r_user,
        d_r_target=d_r_target,
        gain_tx=db_to_linear(cfg["G_S_T_dBi"]),
        gain_rx=db_to_linear(cfg["G_omega_R_dBi"]),
        rician_bs_ris=db_to_linear(cfg["K_SR_dB"]),
        rician_ris_user=db_to_linear(cfg["K_RD_dB"]),
        rcs=np.full(n_targets, db_to_linear(cfg["sigma_RCS_dBsm"])),
        power_budget=dbm_to_watt(cfg["P_S_dBm"]),
        noise_w=noise_power(cfg["T_K"], cfg["B_Hz"], db_to_linear(cfg["N_F_dB"])),
        gamma_user_min=db_to_linear(cfg["gamma_D_min_dB"]),
        gamma_eaves_max=db_to_linear(cfg["gamma_T_max_dB"]),
        weights=weights,
        temperature=cfg["T_K"],
        bandwidth=cfg["B_Hz"],
        noise_figure=db_to_linear(cfg["N_F_dB"]),
        config=cfg,
    )
