"""Experiment runner: seeded training, frozen-policy evaluation and sweeps.

All entry points are deterministic functions of (config, seed list). Tables
come back as lists of row dicts and are mirrored to CSV next to the JSONL
logs; every artifact embeds the config hash.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import baselines, metrics, mlp
from .agents import compress_obs
from .config import ConfigError, ExperimentConfig
from .env import EnvConfig, SubnetworkEnv
from .federated import Trainer, TrainerConfig, TrainingMode

RL_MODES = ("f-maddqn", "f-mappo", "c-maddqn", "c-mappo", "d-maddqn", "d-mappo")
BASELINE_MODES = ("cgc", "greedy", "random")


def build_env(
    config: ExperimentConfig,
    seed: int,
    n_override: int | None = None,
    radio_override=None,
) -> SubnetworkEnv:
    env_cfg = config.env
    if n_override is not None:
        env_cfg = replace(env_cfg, n_subnetworks=int(n_override))
    return SubnetworkEnv(
        radio_config=radio_override or config.radio,
        env_config=env_cfg,
        layout_config=config.layout,
        obs_config=config.observation,
        reward_config=config.reward,
        seed=seed,
    )


def trainer_config(config: ExperimentConfig, seed: int, checkpoint_dir=None) -> TrainerConfig:
    a = config.agent
    return TrainerConfig(
        episodes=config.train.episodes,
        tau_agg=config.train.tau_agg,
        hidden=tuple(a.hidden),
        learning_rate=a.learning_rate,
        discount=a.discount,
        batch_size=a.batch_size,
        replay_capacity=a.replay_capacity,
        polyak_tau=a.polyak_tau,
        epsilon_start=a.epsilon_start,
        epsilon_end=a.epsilon_end,
        epsilon_decay_fraction=a.epsilon_decay_fraction,
        warmup_transitions=a.warmup_transitions,
        rollout_steps=a.rollout_steps,
        clip_eta=a.clip_eta,
        ppo_epochs=a.ppo_epochs,
        ppo_minibatch=a.ppo_minibatch,
        gae_lambda=a.gae_lambda,
        optimizer=a.optimizer,
        reward_scale=a.reward_scale,
        agent_seed=seed,
        checkpoint_dir=checkpoint_dir,
    )


# -- policies ---------------------------------------------------------------


class RlPolicy:
    """Frozen network deployed to every subnetwork; greedy action selection.

    Works for both learner families: the acting net maps an observation to
    one score per channel (Q-values or action probabilities) and the argmax
    is taken either way.
    """

    def __init__(self, spec: mlp.MlpSpec, params: np.ndarray):
        self.spec = spec
        self.params = params

    def reset(self, env, out) -> None:
        pass

    def act(self, env, out) -> np.ndarray:
        scores = mlp.forward(self.params, self.spec, compress_obs(out.observations))
        return np.argmax(scores, axis=1) + 1


class GreedyPolicy:
    """Highest previous-step SINR per subnetwork (worst device per channel)."""

    def reset(self, env, out) -> None:
        pass

    def act(self, env, out) -> np.ndarray:
        per_channel = out.sinrs.min(axis=1)  # (N, K)
        return np.array([baselines.greedy_select(v) for v in per_channel])


class RandomPolicy:
    """One uniform draw per episode, held fixed."""

    def __init__(self, seed: int):
        self._seed = seed
        self._episode = 0
        self._alloc = None

    def reset(self, env, out) -> None:
        self._alloc = baselines.random_allocate(
            env.n, env.k, int(np.random.SeedSequence([self._seed, self._episode]).generate_state(1)[0])
        )
        self._episode += 1

    def act(self, env, out) -> np.ndarray:
        return self._alloc


class CgcPolicy:
    """Centralized graph coloring on current pairwise AP coupling powers.

    Recomputed lazily just before a switching instant (every step when
    every_step is set); the environment's gating applies the colors.
    """

    def __init__(self, every_step: bool = False):
        self.every_step = every_step
        self._colors = None

    def reset(self, env, out) -> None:
        self._colors = self._recolor(env)

    def _recolor(self, env) -> np.ndarray:
        graph = baselines.build_graph(env.pairwise_ap_power(), env.k)
        colors = baselines.cgc_allocate(graph, env.k)
        # stabilize labels against the live allocation so gated adoption
        # does not churn subnetworks whose partition slot is unchanged
        return baselines.match_color_labels(colors, env.allocation, env.k)

    def act(self, env, out) -> np.ndarray:
        due_next = np.any(env.switch_schedule.next_switch_step == env.t + 1)
        if self.every_step or due_next or self._colors is None:
            self._colors = self._recolor(env)
        return self._colors


def make_policy(mode: str, env, params_and_spec=None, seed: int = 0, every_step=False):
    if mode in BASELINE_MODES:
        if mode == "greedy":
            return GreedyPolicy()
        if mode == "random":
            return RandomPolicy(seed)
        return CgcPolicy(every_step)
    if params_and_spec is None:
        raise ConfigError(f"mode {mode!r} needs a checkpoint")
    spec, params = params_and_spec
    if spec.input_dim != env.obs_dim or spec.output_dim != env.k:
        raise ConfigError(
            f"checkpoint net {spec.layer_sizes} does not match environment "
            f"(obs_dim={env.obs_dim}, channels={env.k})"
        )
    return RlPolicy(spec, params)


# -- rollout engine -----------------------------------------------------------


@dataclass
class EvalResult:
    mode: str
    rates_bps: np.ndarray  # per (episode, device) mean achieved rate
    step_rates_bps: np.ndarray  # per-step per-device samples
    mean_reward: float
    bandwidth_hz: float


def evaluate_policy(
    config: ExperimentConfig,
    mode: str,
    params_and_spec=None,
    n_override: int | None = None,
    radio_override=None,
    episodes: int | None = None,
    seeds=None,
) -> EvalResult:
    episodes = episodes if episodes is not None else config.eval.episodes
    seeds = seeds if seeds is not None else config.eval.seeds
    per_ep_device = []
    step_samples = []
    rewards = []
    for seed in seeds:
        env = build_env(config, seed, n_override=n_override, radio_override=radio_override)
        policy = make_policy(
            mode, env, params_and_spec, seed=seed, every_step=config.eval.cgc_every_step
        )
        for _ in range(episodes):
            out = env.reset()
            policy.reset(env, out)
            ep_rates = []
            for _ in range(env.cfg.steps_per_episode):
                out = env.step(policy.act(env, out))
                ep_rates.append(out.rates.ravel())
                rewards.append(out.rewards.mean())
            ep_rates = np.array(ep_rates)  # (T, N*M)
            step_samples.append(ep_rates.ravel())
            per_ep_device.append(ep_rates.mean(axis=0))
    return EvalResult(
        mode=mode,
        rates_bps=np.concatenate(per_ep_device),
        step_rates_bps=np.concatenate(step_samples),
        mean_reward=float(np.mean(rewards)),
        bandwidth_hz=config.radio.channel_bandwidth_hz,
    )


# -- suites -------------------------------------------------------------------


def run_train(config: ExperimentConfig, out_dir=None) -> dict:
    """Train config.train.mode for every seed; writes logs and checkpoints."""
    mode = TrainingMode.parse(config.train.mode)
    out = Path(out_dir or config.train.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(
        json.dumps({"config_hash": config.config_hash, "config": config.to_dict()}, indent=2)
    )
    artifacts = {}
    for seed in config.train.seeds:
        env = build_env(config, seed)
        trainer = Trainer(mode, env, trainer_config(config, seed, checkpoint_dir=str(out)))
        log = trainer.run()
        stem = f"{mode.name}_tau{config.train.tau_agg}_seed{seed}"
        log_path = out / f"train_{stem}.jsonl"
        sink = metrics.MetricsSink(log_path, config.config_hash)
        sink.write_many(log.records)
        spec, params = trainer.final_acting()
        ckpt_path = out / f"ckpt_{stem}.bin"
        mlp.save_weights(ckpt_path, spec, params)
        artifacts[seed] = {"log": str(log_path), "checkpoint": str(ckpt_path), "records": log}
    return artifacts


def _load_checkpoint(checkpoint):
    if checkpoint is None:
        return None
    return mlp.load_weights(checkpoint)


def run_eval(config: ExperimentConfig, checkpoint=None, mode=None, out_dir=None) -> list:
    """Rate-CDF percentile table for one frozen policy or baseline."""
    mode = mode or config.train.mode
    ps = _load_checkpoint(checkpoint) if mode in RL_MODES else None
    result = evaluate_policy(config, mode, ps)
    table = metrics.percentile_table(result.step_rates_bps)
    rows = [
        {
            "method": mode,
            "percentile": p,
            "rate_bps": v,
            "rate_bps_hz": v / result.bandwidth_hz,
        }
        for p, v in table
    ]
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        metrics.write_csv(out / f"cdf_{mode}.csv", rows)
    return rows


def run_density_sweep(
    config: ExperimentConfig,
    checkpoint=None,
    n_values=(10, 20, 30, 40, 50),
    methods=("model", "cgc", "greedy", "random"),
    out_dir=None,
) -> list:
    """Average per-device rate for every (N, method) pair."""
    ps = _load_checkpoint(checkpoint)
    rows = []
    for n in n_values:
        for method in methods:
            if method == "model":
                if ps is None:
                    raise ConfigError("density sweep over 'model' needs a checkpoint")
                result = evaluate_policy(config, config.train.mode, ps, n_override=n)
            else:
                result = evaluate_policy(config, method, n_override=n)
            rows.append(
                {
                    "n_subnetworks": n,
                    "method": method if method != "model" else config.train.mode,
                    "avg_rate_bps": float(result.rates_bps.mean()),
                    "avg_rate_bps_hz": float(result.rates_bps.mean() / result.bandwidth_hz),
                }
            )
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        metrics.write_csv(out / "density_sweep.csv", rows)
    return rows


DEFAULT_CLUTTER_SCENARIOS = (
    {"name": "sparse", "scenario": "InF-SL", "clutter_density": 0.2, "clutter_size_m": 10.0},
    {"name": "dense", "scenario": "InF-DL", "clutter_density": 0.6, "clutter_size_m": 2.0},
)


def run_clutter_sweep(
    config: ExperimentConfig,
    checkpoint=None,
    scenarios=DEFAULT_CLUTTER_SCENARIOS,
    methods=("model", "cgc", "greedy", "random"),
    out_dir=None,
) -> list:
    """Min/avg/max per-device rate per clutter scenario per method."""
    ps = _load_checkpoint(checkpoint)
    rows = []
    for sc in scenarios:
        radio_override = replace(
            config.radio,
            scenario=sc["scenario"],
            clutter_density=sc["clutter_density"],
            clutter_size_m=sc["clutter_size_m"],
        )
        for method in methods:
            if method == "model":
                if ps is None:
                    raise ConfigError("clutter sweep over 'model' needs a checkpoint")
                result = evaluate_policy(
                    config, config.train.mode, ps, radio_override=radio_override
                )
                label = config.train.mode
            else:
                result = evaluate_policy(config, method, radio_override=radio_override)
                label = method
            r = result.rates_bps
            rows.append(
                {
                    "scenario": sc["name"],
                    "method": label,
                    "min_rate_bps": float(r.min()),
                    "avg_rate_bps": float(r.mean()),
                    "max_rate_bps": float(r.max()),
                    "avg_rate_bps_hz": float(r.mean() / result.bandwidth_hz),
                }
            )
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        metrics.write_csv(out / "clutter_sweep.csv", rows)
    return rows


def run_oracle_check(
    config: ExperimentConfig, n_snapshots: int = 100, seed: int = 0, out_dir=None
) -> dict:
    """Allocator ordering on frozen snapshots against the exhaustive oracle.

    Greedy is scored as one gated step from the random allocation: agents
    whose switch gate opens react to the measurement taken under it, the rest
    keep their channel (steady-state gate probability 2 / (tau_max + 1)).
    """
    n = config.env.n_subnetworks
    k = config.radio.num_channels
    sums = {"oracle": [], "cgc": [], "greedy": [], "random": []}
    dominated = True
    gate_p = 2.0 / (config.env.tau_max + 1)
    for i in range(n_snapshots):
        env = build_env(config, seed=seed + i)
        env.reset()
        snap = env.snapshot()
        rng = np.random.default_rng(np.random.SeedSequence([seed + i, 13]))
        rand_alloc = baselines.random_allocate(n, k, seed + i)
        _, best = baselines.brute_force_optimal(snap, k)
        graph = baselines.build_graph(snap.ap_rx_mw, k)
        cgc_rate = baselines.sum_rate_bps(snap, baselines.cgc_allocate(graph, k))
        gates = rng.random(n) < gate_p
        greedy_alloc = baselines.greedy_one_shot(snap, rand_alloc, k, gates)
        greedy_rate = baselines.sum_rate_bps(snap, greedy_alloc)
        rand_rate = baselines.sum_rate_bps(snap, rand_alloc)
        sums["oracle"].append(best)
        sums["cgc"].append(cgc_rate)
        sums["greedy"].append(greedy_rate)
        sums["random"].append(rand_rate)
        dominated &= best >= cgc_rate - 1e-9
    report = {name: float(np.mean(v)) for name, v in sums.items()}
    report["oracle_dominates_cgc_everywhere"] = bool(dominated)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "oracle_check.json").write_text(json.dumps(report, indent=2))
    return report
