"""Training orchestration: federated averaging, centralized and distributed modes.

Federated runs train one learner per subnetwork and, every tau_agg environment
steps, replace all trainable parameters with their weighted average (equal
weights by default) before broadcasting the result back. Centralized runs keep
a single parameter set fed by a shared replay buffer (or pooled rollout);
distributed runs never exchange parameters.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mlp
from .agents import (
    DdqnAgent,
    EpsilonSchedule,
    PpoAgent,
    ReplayBuffer,
    RolloutRecord,
    Transition,
)

SCHEMES = ("federated", "centralized", "distributed")
ALGORITHMS = ("maddqn", "mappo")
_SCHEME_PREFIX = {"f": "federated", "c": "centralized", "d": "distributed"}


@dataclass(frozen=True)
class TrainingMode:
    scheme: str
    algorithm: str

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")

    @classmethod
    def parse(cls, name: str) -> "TrainingMode":
        """Parse CLI names like 'f-maddqn', 'c-mappo', 'd-maddqn'."""
        try:
            prefix, algo = name.lower().split("-", 1)
            return cls(_SCHEME_PREFIX[prefix], algo)
        except (ValueError, KeyError):
            raise ValueError(f"unknown training mode {name!r}") from None

    @property
    def name(self) -> str:
        return f"{self.scheme[0]}-{self.algorithm}"


@dataclass
class AggregatorState:
    global_params: np.ndarray | None
    agg_interval_steps: int
    weights: np.ndarray
    round: int = 0


def aggregate(client_params, weights=None) -> np.ndarray:
    """Weighted elementwise average of client parameter vectors.

    Summation runs over a canonical (sorted) addend order around an
    elementwise-min pivot, so the result is independent of client order and
    averaging identical clients returns them bit-exactly.
    """
    stack = np.stack([np.asarray(p, dtype=float) for p in client_params])
    n = stack.shape[0]
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValueError("need one weight per client")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
    if len({p.shape for p in map(np.asarray, client_params)}) > 1:
        raise ValueError("client parameter vectors differ in length")
    pivot = stack.min(axis=0)
    contrib = (stack - pivot) * w[:, None]
    contrib.sort(axis=0)
    return pivot + contrib.sum(axis=0)


def broadcast(state: AggregatorState, agents) -> None:
    """Install the global parameters in every agent and close the round."""
    if state.global_params is None:
        raise ValueError("no aggregated parameters to broadcast")
    for agent in agents:
        agent.set_fed_params(state.global_params)
    state.round += 1


@dataclass
class TrainerConfig:
    episodes: int = 2000
    tau_agg: int = 512
    hidden: tuple = (64, 64)
    learning_rate: float = 3e-4
    discount: float = 0.99
    batch_size: int = 64
    replay_capacity: int = 100_000
    polyak_tau: float = 0.005
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.6
    warmup_transitions: int = 1000
    rollout_steps: int = 256
    clip_eta: float = 0.2
    ppo_epochs: int = 4
    ppo_minibatch: int = 64
    gae_lambda: float = 0.95
    optimizer: str = "adam"
    reward_scale: float = 1.0
    agent_seed: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.tau_agg < 1:
            raise ValueError("tau_agg must be >= 1")


@dataclass
class TrainingLog:
    mode: str
    tau_agg: int
    records: list = field(default_factory=list)

    def append(self, record: dict) -> None:
        self.records.append(record)

    def mean_rewards(self) -> np.ndarray:
        return np.array([r["mean_reward"] for r in self.records])

    def to_jsonl(self, path) -> None:
        with open(path, "w") as f:
            for rec in self.records:
                f.write(json.dumps(rec) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "TrainingLog":
        records = [json.loads(line) for line in open(path) if line.strip()]
        mode = records[0]["mode"] if records else ""
        tau = records[0]["tau_agg"] if records else 0
        log = cls(mode, tau, records)
        return log


class Trainer:
    """Runs episodes for one mode and keeps the learners for checkpointing."""

    def __init__(self, mode: TrainingMode, environment, config: TrainerConfig):
        self.mode = mode
        self.env = environment
        self.cfg = config
        n, k, obs_dim = environment.n, environment.k, environment.obs_dim
        seeds = np.random.SeedSequence([config.agent_seed, 7]).spawn(n)

        def agent_seed(i):
            return int(seeds[i].generate_state(1)[0])

        if mode.scheme == "centralized":
            self.learners = [self._build_learner(obs_dim, k, agent_seed(0), shared=True)]
            self.assign = [0] * n
        else:
            self.learners = [
                self._build_learner(obs_dim, k, agent_seed(i)) for i in range(n)
            ]
            self.assign = list(range(n))
        self.aggregator = AggregatorState(
            None, config.tau_agg, np.full(len(self.learners), 1.0 / len(self.learners))
        )
        self.log = TrainingLog(mode.name, config.tau_agg)
        self.global_step = 0
        self._eps_schedule = EpsilonSchedule(
            config.epsilon_start, config.epsilon_end, config.epsilon_decay_fraction
        )

    def _build_learner(self, obs_dim, k, seed, shared=False):
        c = self.cfg
        if self.mode.algorithm == "maddqn":
            buffer = ReplayBuffer(
                c.replay_capacity, obs_dim, mode="shared" if shared else "individual"
            )
            return DdqnAgent(
                obs_dim,
                k,
                hidden=c.hidden,
                learning_rate=c.learning_rate,
                discount=c.discount,
                batch_size=c.batch_size,
                polyak_tau=c.polyak_tau,
                buffer=buffer,
                seed=seed,
                optimizer=c.optimizer,
                reward_scale=c.reward_scale,
            )
        return PpoAgent(
            obs_dim,
            k,
            hidden=c.hidden,
            learning_rate=c.learning_rate,
            discount=c.discount,
            gae_lambda=c.gae_lambda,
            clip_eta=c.clip_eta,
            epochs_per_update=c.ppo_epochs,
            minibatch_size=c.ppo_minibatch,
            seed=seed,
            optimizer=c.optimizer,
            reward_scale=c.reward_scale,
        )

    def run(self) -> TrainingLog:
        env, cfg = self.env, self.cfg
        n = env.n
        is_dqn = self.mode.algorithm == "maddqn"
        steps_since_rollout = 0
        # one temporally contiguous record sequence per subnetwork; in
        # centralized mode they all feed the single shared learner
        rollouts = [[] for _ in range(n)]

        for episode in range(cfg.episodes):
            t0 = time.perf_counter()
            out = env.reset()
            if is_dqn:
                eps = self._eps_schedule.value(episode, cfg.episodes)
                for lr_ in self.learners:
                    lr_.epsilon = eps
            episode_rewards = np.zeros(n)

            for _ in range(env.cfg.steps_per_episode):
                obs = out.observations
                if is_dqn:
                    actions = np.array(
                        [
                            self.learners[self.assign[i]].act_epsilon_greedy(obs[i])
                            for i in range(n)
                        ]
                    )
                else:
                    sampled = [
                        self.learners[self.assign[i]].act(obs[i]) for i in range(n)
                    ]
                    actions = np.array([s[0] for s in sampled])

                nxt = env.step(actions)
                effective = env.allocation
                episode_rewards += nxt.rewards
                self.global_step += 1

                if is_dqn:
                    for i in range(n):
                        agent = self.learners[self.assign[i]]
                        agent.buffer.add(
                            Transition(
                                obs[i], int(effective[i]), float(nxt.rewards[i]),
                                nxt.observations[i], bool(nxt.done),
                            )
                        )
                    for agent in self.learners:
                        if len(agent.buffer) >= max(cfg.warmup_transitions, cfg.batch_size):
                            agent.ddqn_update()
                else:
                    for i in range(n):
                        _, probs, value = sampled[i]
                        eff = int(effective[i])
                        rollouts[i].append(
                            RolloutRecord(
                                obs[i], eff, float(np.log(probs[eff - 1] + 1e-12)),
                                float(nxt.rewards[i]), value, bool(nxt.done),
                            )
                        )
                    steps_since_rollout += 1
                    if steps_since_rollout >= cfg.rollout_steps:
                        boots = [
                            0.0
                            if nxt.done
                            else self.learners[self.assign[i]].value(nxt.observations[i])
                            for i in range(n)
                        ]
                        if self.mode.scheme == "centralized":
                            self.learners[0].update_trajectories(rollouts, boots)
                        else:
                            for i in range(n):
                                self.learners[i].update_trajectories(
                                    [rollouts[i]], [boots[i]]
                                )
                        rollouts = [[] for _ in range(n)]
                        steps_since_rollout = 0

                if (
                    self.mode.scheme == "federated"
                    and self.global_step % cfg.tau_agg == 0
                ):
                    self._federated_round()

                out = nxt

            wall_ms = (time.perf_counter() - t0) * 1000.0
            per_agent = episode_rewards / env.cfg.steps_per_episode
            self.log.append(
                {
                    "episode": episode,
                    "mode": self.mode.name,
                    "tau_agg": cfg.tau_agg,
                    "mean_reward": float(per_agent.mean()),
                    "per_agent_reward": [float(v) for v in per_agent],
                    "aggregations_so_far": self.aggregator.round,
                    "wall_ms": wall_ms,
                }
            )
        return self.log

    def _federated_round(self) -> None:
        params = [agent.get_fed_params() for agent in self.learners]
        self.aggregator.global_params = aggregate(params, self.aggregator.weights)
        broadcast(self.aggregator, self.learners)
        if self.cfg.checkpoint_dir:
            path = Path(self.cfg.checkpoint_dir)
            path.mkdir(parents=True, exist_ok=True)
            spec, acting = self._acting_slice(self.aggregator.global_params)
            mlp.save_weights(path / "round_checkpoint.bin", spec, acting)

    def _acting_slice(self, fed_params: np.ndarray):
        """(spec, params) of the deployable acting network."""
        ref = self.learners[0]
        if self.mode.algorithm == "maddqn":
            return ref.spec, fed_params
        return ref.actor_spec, fed_params[: ref.actor_spec.num_params]

    def final_params(self) -> np.ndarray:
        """One deployable parameter vector summarizing the run."""
        if self.mode.scheme == "federated":
            return aggregate(
                [a.get_fed_params() for a in self.learners], self.aggregator.weights
            )
        return self.learners[0].get_fed_params()

    def final_acting(self):
        """Acting-network (spec, params) for checkpointing and evaluation."""
        return self._acting_slice(self.final_params())


def train(mode: TrainingMode, environment, config: TrainerConfig) -> TrainingLog:
    """Train one run and return its per-episode log."""
    return Trainer(mode, environment, config).run()
