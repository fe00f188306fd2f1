"""DEC-POMDP environment for distributed channel allocation among subnetworks.

Each in-robot subnetwork is an agent choosing one of K shared channels.
Devices sense all K channels every step (full-band sensing), so the local
observation is the per-channel SIR (or SINR) vector over the subnetwork's
devices, reduced by the configured observation reduction function. Channel
switches are gated: an agent's action takes effect only at its switching
instants, which are spaced by random integer delays in [1, tau_max].

Reward per subnetwork (rates as spectral efficiencies r/B in bps/Hz):

    R_n = lambda1 * sum_m r_nm - lambda2 * sum_m 1[r_nm < r_min] * (r_min - r_nm)

i.e. rate maximization minus the shortfall below the minimum-rate target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import factory, radio

ORFS = ("full", "mean", "max", "median", "min")
MEASURES = ("SIR", "SINR")

# measured-interference floor (mW); keeps SIR finite on empty channels
_SIR_FLOOR_MW = 1e-24


@dataclass
class ObservationConfig:
    orf: str = "min"
    measure: str = "SIR"

    def __post_init__(self):
        if self.orf not in ORFS:
            raise ValueError(f"orf must be one of {ORFS}")
        if self.measure not in MEASURES:
            raise ValueError(f"measure must be one of {MEASURES}")


@dataclass
class RewardConfig:
    lambda1: float = 1.0
    lambda2: float = 1.0
    r_min_bps_hz: float = 11.0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("reward scaling factors must be non-negative")
        if self.lambda1 == 0 and self.lambda2 == 0:
            raise ValueError("at least one reward term must be active")


@dataclass
class EnvConfig:
    n_subnetworks: int = 20
    devices_per_subnetwork: int = 1
    dt_s: float = 0.005
    steps_per_episode: int = 200
    tau_max: int = 10
    min_separation_m: float = 1.0
    coverage_radius_m: float = 1.0
    robot_speed_mps: float = 3.0
    los_redraw_threshold_m: float = 1.0


@dataclass
class SwitchSchedule:
    next_switch_step: np.ndarray
    tau_max: int = 10


@dataclass
class StepOutput:
    observations: np.ndarray  # (N, obs_dim)
    rewards: np.ndarray  # (N,)
    rates: np.ndarray  # (N, M) bit/s
    sinrs: np.ndarray  # (N, M, K) per-channel SINR, linear
    done: bool


@dataclass
class EnvSnapshot:
    """Frozen radio state for oracle searches and the coloring baseline."""

    rx_mw: np.ndarray  # (N, N, M) AP i -> device (n, m) received power
    ap_rx_mw: np.ndarray  # (N, N) AP i -> AP n received power
    noise_mw: float
    radio: radio.RadioConfig


def reward(rates_bps_hz, config: RewardConfig) -> float:
    """Reward of one subnetwork from its devices' spectral efficiencies."""
    r = np.asarray(rates_bps_hz, dtype=float)
    shortfall = np.maximum(config.r_min_bps_hz - r, 0.0)
    return float(config.lambda1 * r.sum() - config.lambda2 * shortfall.sum())


class SubnetworkEnv:
    """Simulator tying together mobility, the radio model and the reward."""

    def __init__(
        self,
        radio_config: radio.RadioConfig = None,
        env_config: EnvConfig = None,
        layout_config: factory.LayoutConfig = None,
        obs_config: ObservationConfig = None,
        reward_config: RewardConfig = None,
        seed: int = 0,
    ):
        self.radio = radio_config or radio.RadioConfig()
        self.cfg = env_config or EnvConfig()
        self.obs_cfg = obs_config or ObservationConfig()
        self.reward_cfg = reward_config or RewardConfig()
        self.layout = factory.build_layout(seed, layout_config or factory.LayoutConfig())
        self.noise_mw = radio.noise_power_mw(self.radio)
        self._base_seed = seed
        self._episode = -1
        self.t = 0
        self.deployment = None
        self.allocation = None
        self.switch_schedule = None
        self._last = None

    # -- observation geometry -------------------------------------------------

    @property
    def n(self) -> int:
        return self.cfg.n_subnetworks

    @property
    def m(self) -> int:
        return self.cfg.devices_per_subnetwork

    @property
    def k(self) -> int:
        return self.radio.num_channels

    @property
    def obs_dim(self) -> int:
        if self.obs_cfg.orf == "full":
            return self.k * self.m
        return self.k

    # -- episode control -------------------------------------------------------

    def reset(self, seed: int | None = None) -> StepOutput:
        if seed is not None:
            entropy = [int(seed)]
        else:
            self._episode += 1
            entropy = [self._base_seed, self._episode]
        ss = np.random.SeedSequence(entropy)
        kids = ss.spawn(5)
        spawn_seed = int(kids[0].generate_state(1)[0])
        self._alloc_rng = np.random.default_rng(kids[1])
        self._los_rng = np.random.default_rng(kids[2])
        self._shadow_rng = np.random.default_rng(kids[3])
        fading_rng = np.random.default_rng(kids[4])

        self.deployment = factory.spawn(
            self.layout,
            self.n,
            self.m,
            spawn_seed,
            min_separation_m=self.cfg.min_separation_m,
            coverage_radius_m=self.cfg.coverage_radius_m,
            max_speed_mps=self.cfg.robot_speed_mps,
        )
        self._prev_ap = self.deployment.ap_positions()

        self.t = 0
        self.allocation = self._alloc_rng.integers(1, self.k + 1, size=self.n)
        first = self._alloc_rng.integers(1, self.cfg.tau_max + 1, size=self.n)
        self.switch_schedule = SwitchSchedule(first, self.cfg.tau_max)

        # link state over (tx AP, rx subnetwork, device); the extra device
        # column is the receiving AP itself, used for AP-to-AP coupling
        shape = (self.n, self.n, self.m + 1)
        d = self._link_distances()
        self._los = self._los_rng.random(shape) < radio.los_probability(d, self.radio)
        self._los_draw_d = d
        self._shadow_u = self._shadow_rng.standard_normal(shape)
        doppler = self.radio.doppler_hz(self.cfg.robot_speed_mps)
        self._fading = radio.FadingState.fresh(shape, doppler, fading_rng)

        self._rebuild()
        return self._last

    def step(self, actions) -> StepOutput:
        acts = np.asarray(actions, dtype=int)
        if acts.shape != (self.n,):
            raise ValueError(f"need one action per subnetwork, got shape {acts.shape}")
        if np.any((acts < 1) | (acts > self.k)):
            raise ValueError(f"channel indices must lie in 1..{self.k}")
        if self.deployment is None:
            raise RuntimeError("call reset() before step()")

        self.t += 1
        due = self.switch_schedule.next_switch_step == self.t
        self.allocation[due] = acts[due]
        if due.any():
            gaps = self._alloc_rng.integers(1, self.cfg.tau_max + 1, size=int(due.sum()))
            self.switch_schedule.next_switch_step[due] = self.t + gaps

        factory.step_mobility(self.deployment, self.layout, self.cfg.dt_s)
        ap = self.deployment.ap_positions()
        moved = np.linalg.norm(ap - self._prev_ap, axis=1)
        self._prev_ap = ap

        d = self._link_distances(ap)
        redraw = np.abs(d - self._los_draw_d) > self.cfg.los_redraw_threshold_m
        if redraw.any():
            p = radio.los_probability(d, self.radio)
            fresh = self._los_rng.random(d.shape) < p
            self._los = np.where(redraw, fresh, self._los)
            self._los_draw_d = np.where(redraw, d, self._los_draw_d)

        # shadowing decorrelates with the total distance moved by both ends
        alpha = np.exp(-(moved[:, None] + moved[None, :]) / self.radio.shadow_decorr_m)
        alpha = alpha[:, :, None]
        z = self._shadow_rng.standard_normal(d.shape)
        self._shadow_u = alpha * self._shadow_u + np.sqrt(1.0 - alpha**2) * z

        radio.step_fading(self._fading, self.cfg.dt_s)

        self._rebuild(d)
        return self._last

    # -- radio pipeline --------------------------------------------------------

    def _link_distances(self, ap=None) -> np.ndarray:
        if ap is None:
            ap = self.deployment.ap_positions()  # (N, 2)
        offs = np.array([r.device_offsets for r in self.deployment.robots])  # (N, M, 2)
        dev = ap[:, None, :] + offs
        rx_points = np.concatenate([dev, ap[:, None, :]], axis=1)  # (N, M+1, 2)
        diff = ap[:, None, None, :] - rx_points[None, :, :, :]
        return np.linalg.norm(diff, axis=-1)

    def _rebuild(self, d=None) -> None:
        if d is None:
            d = self._link_distances()
        pl = radio.pathloss_db(np.maximum(d, 1.0), self.radio, self._los)
        sigma = self.radio.shadow_sigma(self._los)
        shadow_db = sigma * self._shadow_u
        rx = radio.compose_gain(pl, shadow_db, self._fading.h, self.radio.tx_power_dbm)
        self._rx = rx

        rx_dev = rx[:, :, : self.m]  # (N, N, M)
        g = rx_dev[np.arange(self.n), np.arange(self.n), :]  # (N, M) own signal

        occ = np.zeros((self.k, self.n))
        occ[self.allocation - 1, np.arange(self.n)] = 1.0
        total = np.einsum("ki,inm->knm", occ, rx_dev)  # (K, N, M)
        own = occ[:, :, None] * g[None, :, :]
        interference = np.transpose(total - own, (1, 2, 0))  # (N, M, K)

        sinr_cube = g[:, :, None] / (interference + self.noise_mw)
        if self.obs_cfg.measure == "SIR":
            measure = g[:, :, None] / np.maximum(interference, _SIR_FLOOR_MW)
        else:
            measure = sinr_cube

        own_sinr = np.take_along_axis(
            sinr_cube, (self.allocation - 1)[:, None, None], axis=2
        )[:, :, 0]
        rates = radio.achievable_rate(own_sinr, self.radio)

        se = rates / self.radio.channel_bandwidth_hz
        shortfall = np.maximum(self.reward_cfg.r_min_bps_hz - se, 0.0)
        rewards = (
            self.reward_cfg.lambda1 * se.sum(axis=1)
            - self.reward_cfg.lambda2 * shortfall.sum(axis=1)
        )

        self._measure_cube = measure
        obs = self._apply_orf(measure)
        self._last = StepOutput(
            observations=obs,
            rewards=rewards,
            rates=rates,
            sinrs=sinr_cube,
            done=self.t >= self.cfg.steps_per_episode,
        )

    def _apply_orf(self, cube: np.ndarray) -> np.ndarray:
        orf = self.obs_cfg.orf
        if orf == "full":
            # channel-major blocks of per-device measurements
            return np.transpose(cube, (0, 2, 1)).reshape(self.n, -1)
        if orf == "mean":
            return cube.mean(axis=1)
        if orf == "max":
            return cube.max(axis=1)
        if orf == "median":
            return np.median(cube, axis=1)
        return cube.min(axis=1)

    def observe(self, n: int) -> np.ndarray:
        if self._last is None:
            raise RuntimeError("no measurements yet; call reset() first")
        return self._last.observations[n]

    def force_allocation(self, allocation) -> StepOutput:
        """Recompute outputs under a given joint allocation on frozen radio
        state (no time advance); used by oracles and debugging."""
        alloc = np.asarray(allocation, dtype=int)
        if alloc.shape != (self.n,) or np.any((alloc < 1) | (alloc > self.k)):
            raise ValueError("invalid allocation")
        self.allocation = alloc.copy()
        self._rebuild()
        return self._last

    # -- views for baselines and oracles ----------------------------------------

    def snapshot(self) -> EnvSnapshot:
        return EnvSnapshot(
            rx_mw=self._rx[:, :, : self.m].copy(),
            ap_rx_mw=self._rx[:, :, self.m].copy(),
            noise_mw=self.noise_mw,
            radio=self.radio,
        )

    def pairwise_ap_power(self) -> np.ndarray:
        """ap_rx[i, n]: power from AP i measured at AP n (full band)."""
        return self._rx[:, :, self.m].copy()

    def gain_tensor(self) -> radio.ChannelGainTensor:
        return radio.ChannelGainTensor(self._rx[:, :, : self.m].copy())
