"""Per-subnetwork learners: double-DQN with replay and clipped-surrogate PPO.

Observations arrive as linear power ratios spanning many decades, so both
learners compress them to clipped dB/40 before the network input. Rewards can
optionally be scaled inside the learner (targets only); logged environment
rewards are never altered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mlp

OBS_DB_SCALE = 40.0


def compress_obs(obs) -> np.ndarray:
    """Map linear measurements to roughly unit scale: clip(dB / 40, -3, 3)."""
    x = np.asarray(obs, dtype=float)
    return np.clip(10.0 * np.log10(x + 1e-12) / OBS_DB_SCALE, -3.0, 3.0)


@dataclass
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.05
    decay_fraction: float = 0.6  # fraction of episodes spent decaying

    def value(self, episode: int, total_episodes: int) -> float:
        horizon = max(1.0, self.decay_fraction * total_episodes)
        frac = min(1.0, episode / horizon)
        return self.start + frac * (self.end - self.start)


@dataclass
class Transition:
    state: np.ndarray
    action: int  # channel index in 1..K
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """FIFO ring buffer over flat transition arrays."""

    def __init__(self, capacity: int, obs_dim: int, mode: str = "individual"):
        if mode not in ("shared", "individual"):
            raise ValueError("mode must be 'shared' or 'individual'")
        self.capacity = int(capacity)
        self.mode = mode
        self._s = np.zeros((self.capacity, obs_dim))
        self._a = np.zeros(self.capacity, dtype=int)
        self._r = np.zeros(self.capacity)
        self._s2 = np.zeros((self.capacity, obs_dim))
        self._d = np.zeros(self.capacity, dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, t: Transition) -> None:
        i = self._next
        self._s[i] = t.state
        self._a[i] = t.action
        self._r[i] = t.reward
        self._s2[i] = t.next_state
        self._d[i] = t.done
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Minibatch without replacement: (s, a, r, s', done) arrays."""
        idx = rng.choice(self._size, size=min(batch_size, self._size), replace=False)
        return self._s[idx], self._a[idx], self._r[idx], self._s2[idx], self._d[idx]


class DdqnAgent:
    """Double-DQN: the online net picks the next action, the target net rates it."""

    def __init__(
        self,
        obs_dim: int,
        num_channels: int,
        hidden=(64, 64),
        learning_rate: float = 3e-4,
        discount: float = 0.99,
        batch_size: int = 64,
        polyak_tau: float = 0.005,
        replay_capacity: int = 100_000,
        buffer: ReplayBuffer = None,
        seed: int = 0,
        optimizer: str = "adam",
        reward_scale: float = 1.0,
    ):
        if not 0.0 <= discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        self.k = num_channels
        self.spec = mlp.MlpSpec((obs_dim, *hidden, num_channels), "relu", "linear")
        self.online = mlp.init_params(self.spec, seed)
        self.target = self.online.copy()
        self.opt = mlp.AdamState(learning_rate=learning_rate, method=optimizer)
        self.epsilon = 1.0
        self.discount = discount
        self.batch_size = batch_size
        self.polyak_tau = polyak_tau
        self.reward_scale = reward_scale
        self.buffer = buffer or ReplayBuffer(replay_capacity, obs_dim)
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))

    def q_values(self, obs) -> np.ndarray:
        return mlp.forward(self.online, self.spec, compress_obs(obs))

    def act_epsilon_greedy(self, obs) -> int:
        """Uniform channel w.p. epsilon, else argmax-Q (ties to lowest channel)."""
        if self.rng.random() < self.epsilon:
            return int(self.rng.integers(1, self.k + 1))
        return int(np.argmax(self.q_values(obs))) + 1

    def ddqn_update(self, minibatch=None) -> float:
        """One optimizer step on the mean squared Bellman error; returns the loss."""
        if minibatch is None:
            minibatch = self.buffer.sample(self.batch_size, self.rng)
        s, a, r, s2, done = minibatch
        if len(a) == 0:
            raise ValueError("minibatch must be non-empty")
        b = len(a)
        # one online-net pass over [s; s'] serves both Q(s, .) and the argmax
        x_both = compress_obs(np.concatenate([s, s2]))
        q_both, (pre, act, _) = mlp.forward_cached(self.online, self.spec, x_both)
        q, q_next_online = q_both[:b], q_both[b:]
        a_star = np.argmax(q_next_online, axis=1)
        q_next_target = mlp.forward(self.target, self.spec, x_both[b:])
        rows = np.arange(b)
        bootstrap = q_next_target[rows, a_star] * (~np.asarray(done, dtype=bool))
        y = r * self.reward_scale + self.discount * bootstrap

        err = q[rows, a - 1] - y
        loss = float(np.mean(err**2))
        upstream = np.zeros_like(q)
        upstream[rows, a - 1] = 2.0 * err / b
        cache_s = ([z[:b] for z in pre], [z[:b] for z in act], False)
        grad = mlp.backward_cached(self.online, self.spec, cache_s, upstream)
        self.online, self.opt = mlp.adam_step(self.online, grad, self.opt)
        self.target = mlp.polyak_update(self.target, self.online, self.polyak_tau)
        return loss

    # federated exchange: the online net is the trainable unit
    def get_fed_params(self) -> np.ndarray:
        return self.online.copy()

    def set_fed_params(self, params: np.ndarray) -> None:
        self.online = params.copy()
        self.target = params.copy()


def compute_advantages(
    rewards, values, dones, next_value: float, discount: float, gae_lambda: float,
    normalize: bool = True,
):
    """GAE(lambda) advantages and value targets G = advantage + value.

    dones mask bootstrapping across episode boundaries inside one rollout.
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    d = np.asarray(dones, dtype=bool)
    adv = np.zeros_like(r)
    last = 0.0
    for t in range(len(r) - 1, -1, -1):
        nv = next_value if t == len(r) - 1 else v[t + 1]
        mask = 0.0 if d[t] else 1.0
        delta = r[t] + discount * nv * mask - v[t]
        last = delta + discount * gae_lambda * mask * last
        adv[t] = last
    returns = adv + v
    if normalize:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return adv, returns


@dataclass
class RolloutRecord:
    state: np.ndarray
    action: int  # channel 1..K
    logp: float
    reward: float
    value: float
    done: bool


class PpoAgent:
    """Clipped-surrogate PPO with a softmax actor and a scalar critic."""

    def __init__(
        self,
        obs_dim: int,
        num_channels: int,
        hidden=(64, 64),
        learning_rate: float = 3e-4,
        discount: float = 0.99,
        gae_lambda: float = 0.95,
        clip_eta: float = 0.2,
        epochs_per_update: int = 4,
        minibatch_size: int = 64,
        seed: int = 0,
        optimizer: str = "adam",
        reward_scale: float = 1.0,
    ):
        if clip_eta <= 0:
            raise ValueError("clip_eta must be positive")
        self.k = num_channels
        self.actor_spec = mlp.MlpSpec((obs_dim, *hidden, num_channels), "relu", "softmax")
        self.critic_spec = mlp.MlpSpec((obs_dim, *hidden, 1), "relu", "linear")
        self.actor = mlp.init_params(self.actor_spec, seed)
        self.critic = mlp.init_params(self.critic_spec, seed + 10_000)
        self.actor_opt = mlp.AdamState(learning_rate=learning_rate, method=optimizer)
        self.critic_opt = mlp.AdamState(learning_rate=learning_rate, method=optimizer)
        self.discount = discount
        self.gae_lambda = gae_lambda
        self.clip_eta = clip_eta
        self.epochs_per_update = epochs_per_update
        self.minibatch_size = minibatch_size
        self.reward_scale = reward_scale
        self.rollout: list[RolloutRecord] = []
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))

    def policy(self, obs) -> np.ndarray:
        return mlp.forward(self.actor, self.actor_spec, compress_obs(obs))

    def value(self, obs) -> float:
        return float(mlp.forward(self.critic, self.critic_spec, compress_obs(obs))[0])

    def act(self, obs):
        """Sample a channel; returns (action, probs, value)."""
        probs = self.policy(obs)
        action = int(self.rng.choice(self.k, p=probs)) + 1
        return action, probs, self.value(obs)

    def act_greedy(self, obs) -> int:
        return int(np.argmax(self.policy(obs))) + 1

    def ppo_collect(self, record: RolloutRecord) -> None:
        self.rollout.append(record)

    def ppo_update(self, next_value: float = 0.0):
        """Several epochs of clipped-surrogate / value-MSE steps; clears the rollout."""
        result = self.update_trajectories([self.rollout], [next_value])
        self.rollout = []
        return result

    def update_trajectories(self, trajectories, next_values):
        """Update from one or more temporally contiguous record sequences.

        Advantages are estimated per trajectory and then pooled (normalized
        over the pooled batch); used directly by the centralized trainer,
        which keeps one trajectory per subnetwork for a single shared policy.
        """
        trajectories = [t for t in trajectories if t]
        if not trajectories:
            raise ValueError("rollout is empty")
        states_l, actions_l, logp_l, adv_l, ret_l = [], [], [], [], []
        for records, boot in zip(trajectories, next_values):
            rewards = np.array([r.reward for r in records]) * self.reward_scale
            values = np.array([r.value for r in records])
            dones = np.array([r.done for r in records], dtype=bool)
            a, g = compute_advantages(
                rewards, values, dones, boot, self.discount, self.gae_lambda,
                normalize=False,
            )
            adv_l.append(a)
            ret_l.append(g)
            states_l.append(np.array([r.state for r in records]))
            actions_l.append(np.array([r.action for r in records], dtype=int))
            logp_l.append(np.array([r.logp for r in records]))
        states = compress_obs(np.concatenate(states_l))
        actions = np.concatenate(actions_l)
        logp_old = np.concatenate(logp_l)
        returns = np.concatenate(ret_l)
        adv = np.concatenate(adv_l)
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

        n = len(actions)
        pi_losses, v_losses = [], []
        for _ in range(self.epochs_per_update):
            perm = self.rng.permutation(n)
            for lo in range(0, n, self.minibatch_size):
                idx = perm[lo : lo + self.minibatch_size]
                s, a, adv_b, ret_b = states[idx], actions[idx], adv[idx], returns[idx]
                p_old = np.exp(logp_old[idx])
                rows = np.arange(len(idx))

                probs, cache = mlp.forward_cached(self.actor, self.actor_spec, s)
                p_a = probs[rows, a - 1]
                ratio = p_a / p_old
                clipped = np.clip(ratio, 1.0 - self.clip_eta, 1.0 + self.clip_eta)
                surrogate = np.minimum(ratio * adv_b, clipped * adv_b)
                pi_losses.append(-float(np.mean(surrogate)))

                # d surrogate / d p_a vanishes once the clipped branch is active
                active = ~(
                    ((adv_b >= 0) & (ratio > 1.0 + self.clip_eta))
                    | ((adv_b < 0) & (ratio < 1.0 - self.clip_eta))
                )
                upstream = np.zeros_like(probs)
                upstream[rows, a - 1] = -(adv_b / p_old) * active / len(idx)
                grad = mlp.backward_cached(self.actor, self.actor_spec, cache, upstream)
                self.actor, self.actor_opt = mlp.adam_step(self.actor, grad, self.actor_opt)

                v, v_cache = mlp.forward_cached(self.critic, self.critic_spec, s)
                v_err = v[:, 0] - ret_b
                v_losses.append(float(np.mean(v_err**2)))
                v_up = (2.0 * v_err / len(idx))[:, None]
                v_grad = mlp.backward_cached(self.critic, self.critic_spec, v_cache, v_up)
                self.critic, self.critic_opt = mlp.adam_step(self.critic, v_grad, self.critic_opt)

        return float(np.mean(pi_losses)), float(np.mean(v_losses))

    # federated exchange: actor and critic travel as one flat vector
    def get_fed_params(self) -> np.ndarray:
        return np.concatenate([self.actor, self.critic])

    def set_fed_params(self, params: np.ndarray) -> None:
        na = self.actor_spec.num_params
        self.actor = params[:na].copy()
        self.critic = params[na:].copy()
