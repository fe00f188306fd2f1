"""Link-level radio model: pathloss, shadowing, fading, SINR and short-packet rate.

Pathloss follows the 3GPP TR 38.901 indoor-factory formulas for the
sparse-clutter (InF-SL) and dense-clutter (InF-DL) low-antenna scenarios.
Shadowing is a log-normal field with exponential spatial correlation
exp(-d / d_decorr); small-scale fading is a temporally correlated Rayleigh
process driven as AR(1). Achievable rate uses the finite-blocklength normal
approximation

    r = B * [ log2(1 + gamma) - sqrt(V / l) * Qinv(eps) * log10(e) ],

clamped at zero, with channel dispersion V = 1 - (1 + gamma)^-2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfcinv, j0

SPEED_OF_LIGHT_MPS = 299_792_458.0
THERMAL_NOISE_DBM_PER_HZ = -174.0
LOG10_E = np.log10(np.e)

SCENARIOS = ("InF-SL", "InF-DL")

# TR 38.901 Table 7.4.1-1 shadow-fading std devs (dB)
SHADOW_SIGMA_LOS_DB = 4.0
SHADOW_SIGMA_NLOS_DB = {"InF-SL": 5.7, "InF-DL": 7.2}


@dataclass
class RadioConfig:
    """Physical-layer parameters (defaults are the evaluated factory setup)."""

    carrier_freq_hz: float = 6e9
    channel_bandwidth_hz: float = 10e6
    num_channels: int = 4
    tx_power_dbm: float = -10.0
    noise_figure_db: float = 10.0
    blocklength: int = 256
    decode_error_prob: float = 1e-5
    scenario: str = "InF-SL"
    clutter_density: float = 0.2
    clutter_size_m: float = 10.0
    shadow_decorr_m: float = 10.0
    # None -> per-scenario TR 38.901 value by LOS state
    shadow_sigma_db: float | None = None
    # None -> Jakes Doppler v * f_c / c at the given speed
    fading_doppler_hz: float | None = None

    def __post_init__(self):
        if self.num_channels < 1:
            raise ValueError("num_channels must be >= 1")
        if min(self.carrier_freq_hz, self.channel_bandwidth_hz) <= 0:
            raise ValueError("frequencies and bandwidths must be positive")
        if self.blocklength <= 0:
            raise ValueError("blocklength must be positive")
        if not 0.0 < self.decode_error_prob < 1.0:
            raise ValueError("decode_error_prob must lie in (0, 1)")
        if not 0.0 <= self.clutter_density <= 1.0:
            raise ValueError("clutter_density must lie in [0, 1]")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}")

    def shadow_sigma(self, los) -> np.ndarray:
        """Shadowing std in dB, per-link by LOS state unless overridden."""
        if self.shadow_sigma_db is not None:
            return np.full(np.shape(los), float(self.shadow_sigma_db))
        return np.where(
            np.asarray(los), SHADOW_SIGMA_LOS_DB, SHADOW_SIGMA_NLOS_DB[self.scenario]
        )

    def doppler_hz(self, speed_mps: float) -> float:
        if self.fading_doppler_hz is not None:
            return self.fading_doppler_hz
        return speed_mps * self.carrier_freq_hz / SPEED_OF_LIGHT_MPS


def pathloss_db(d_3d_m, config: RadioConfig, los) -> np.ndarray:
    """TR 38.901 indoor-factory pathloss in dB; valid for d >= 1 m.

    LOS:        31.84 + 21.50 log10(d) + 19.00 log10(f_GHz)
    InF-SL NLOS: max(LOS, 33.0 + 25.5 log10(d) + 20 log10(f_GHz))
    InF-DL NLOS: max(InF-SL NLOS, 18.6 + 35.7 log10(d) + 20 log10(f_GHz))
    """
    d = np.asarray(d_3d_m, dtype=float)
    if np.any(d < 1.0):
        raise ValueError("pathloss model is valid for d_3d >= 1 m")
    f_ghz = config.carrier_freq_hz / 1e9
    log_d = np.log10(d)
    log_f = np.log10(f_ghz)
    pl_los = 31.84 + 21.5 * log_d + 19.0 * log_f
    pl_sl = np.maximum(pl_los, 33.0 + 25.5 * log_d + 20.0 * log_f)
    if config.scenario == "InF-DL":
        pl_nlos = np.maximum(pl_sl, 18.6 + 35.7 * log_d + 20.0 * log_f)
    else:
        pl_nlos = pl_sl
    out = np.where(np.asarray(los), pl_los, pl_nlos)
    return out if out.ndim else float(out)


def los_probability(d_2d_m, config: RadioConfig) -> np.ndarray:
    """P_LOS = exp(-d / k) with k = -d_clutter / ln(1 - r_clutter).

    Equivalently (1 - r_clutter)^(d / d_clutter); tends to 1 as the clutter
    density vanishes.
    """
    d = np.asarray(d_2d_m, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    r = config.clutter_density
    if r <= 0.0:
        out = np.ones_like(d)
    else:
        out = np.exp(d * np.log1p(-r) / config.clutter_size_m)
    return out if out.ndim else float(out)


def noise_power_mw(config: RadioConfig) -> float:
    """Thermal noise sigma^2 = 10^((-174 + NF + 10 log10(B)) / 10) in mW."""
    dbm = (
        THERMAL_NOISE_DBM_PER_HZ
        + config.noise_figure_db
        + 10.0 * np.log10(config.channel_bandwidth_hz)
    )
    return float(10.0 ** (dbm / 10.0))


def compose_gain(pathloss_db, shadow_db, fading, tx_power_dbm) -> np.ndarray:
    """Received power in mW: 10^((p_tx - PL - X) / 10) * |h|^2."""
    h2 = np.abs(np.asarray(fading)) ** 2
    out = 10.0 ** ((tx_power_dbm - np.asarray(pathloss_db) - np.asarray(shadow_db)) / 10.0) * h2
    return out if np.ndim(out) else float(out)


@dataclass
class ShadowField:
    """Correlated log-normal shadowing sampled at a fixed set of positions.

    values_db has marginal N(0, sigma_db^2); the correlation between two
    samples decays as exp(-distance / decorr_m).
    """

    positions: np.ndarray
    values_db: np.ndarray
    sigma_db: float
    decorr_m: float

    def value_at(self, index: int) -> float:
        return float(self.values_db[index])


def _correlated_normals(positions: np.ndarray, decorr_m: float, rng, size=None):
    """Unit-variance Gaussians with covariance exp(-d_ij / decorr)."""
    d = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)
    cov = np.exp(-d / decorr_m)
    # eigh handles duplicated positions (singular but PSD covariance)
    w, v = np.linalg.eigh(cov)
    root = v * np.sqrt(np.clip(w, 0.0, None))
    z = rng.standard_normal((len(positions),) if size is None else (size, len(positions)))
    return z @ root.T


def sample_shadowing(positions, seed: int, config: RadioConfig, sigma_db=None) -> ShadowField:
    """Draw one correlated shadowing realization over the given 2D positions."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    sigma = SHADOW_SIGMA_LOS_DB if config.shadow_sigma_db is None else config.shadow_sigma_db
    if sigma_db is not None:
        sigma = sigma_db
    rng = np.random.default_rng(seed)
    values = sigma * _correlated_normals(pos, config.shadow_decorr_m, rng)
    return ShadowField(pos, values, sigma, config.shadow_decorr_m)


@dataclass
class FadingState:
    """Per-link complex Rayleigh coefficients with AR(1) temporal correlation."""

    h: np.ndarray
    doppler_hz: float
    rng: np.random.Generator = field(repr=False, default=None)

    @classmethod
    def fresh(cls, shape, doppler_hz: float, rng) -> "FadingState":
        h = cls._draw_cn(shape, rng)
        return cls(h, doppler_hz, rng)

    @staticmethod
    def _draw_cn(shape, rng):
        # CN(0, 1): |h|^2 exponential with unit mean
        re = rng.standard_normal(shape)
        im = rng.standard_normal(shape)
        return (re + 1j * im) / np.sqrt(2.0)

    def rho(self, dt_s: float) -> float:
        """Jakes AR(1) coefficient J0(2 pi f_D dt), clamped to [0, 1]."""
        return float(np.clip(j0(2.0 * np.pi * self.doppler_hz * dt_s), 0.0, 1.0))


def step_fading(state: FadingState, dt_s: float) -> FadingState:
    """h' = rho h + sqrt(1 - rho^2) w with w ~ CN(0, 1)."""
    if dt_s <= 0:
        raise ValueError("dt_s must be positive")
    rho = state.rho(dt_s)
    w = FadingState._draw_cn(state.h.shape, state.rng)
    state.h = rho * state.h + np.sqrt(1.0 - rho**2) * w
    return state


def sinr(gains, allocation, n: int, m: int, noise_mw: float) -> float:
    """SINR of device m in subnetwork n under the joint allocation.

    gains[i, n, m] is the received power (mW) from AP i at device (n, m);
    interferers are the other subnetworks sharing n's channel.
    """
    rx = np.asarray(gains.rx_mw if hasattr(gains, "rx_mw") else gains, dtype=float)
    alloc = np.asarray(allocation, dtype=int)
    k = alloc[n]
    interference = 0.0
    for i in range(rx.shape[0]):
        if i != n and alloc[i] == k:
            interference += rx[i, n, m]
    return rx[n, n, m] / (interference + noise_mw)


def dispersion(gamma) -> np.ndarray:
    """Channel dispersion V = 1 - (1 + gamma)^-2, in [0, 1)."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma must be non-negative")
    # keep the open upper bound under floating-point rounding at huge gamma
    out = np.minimum(1.0 - 1.0 / (1.0 + g) ** 2, np.nextafter(1.0, 0.0))
    return out if out.ndim else float(out)


def q_inverse(p) -> np.ndarray:
    """Inverse Gaussian tail function, Qinv(p) = sqrt(2) erfcinv(2p)."""
    out = np.sqrt(2.0) * erfcinv(2.0 * np.asarray(p, dtype=float))
    return out if out.ndim else float(out)


def achievable_rate(gamma, config: RadioConfig) -> np.ndarray:
    """Finite-blocklength achievable rate in bit/s, clamped at zero."""
    eps = config.decode_error_prob
    if not 0.0 < eps < 1.0:
        raise ValueError("decode_error_prob must lie in (0, 1)")
    g = np.asarray(gamma, dtype=float)
    v = dispersion(g)
    penalty = np.sqrt(np.asarray(v) / config.blocklength) * q_inverse(eps) * LOG10_E
    rate = config.channel_bandwidth_hz * (np.log2(1.0 + g) - penalty)
    out = np.maximum(rate, 0.0)
    return out if out.ndim else float(out)


@dataclass
class ChannelGainTensor:
    """Snapshot of received powers: rx_mw[i, n, m] = power (mW) from AP i at
    device m of subnetwork n. Finite and non-negative by construction."""

    rx_mw: np.ndarray

    def __post_init__(self):
        self.rx_mw = np.asarray(self.rx_mw, dtype=float)
        if not np.all(np.isfinite(self.rx_mw)) or np.any(self.rx_mw < 0):
            raise ValueError("received powers must be finite and non-negative")
