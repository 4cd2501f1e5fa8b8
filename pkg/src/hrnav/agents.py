"""DQN and TD3 learners built on ``neuralnet`` and ``replay``.

Continuous actions are handled in a normalised space ``u`` in [-1, 1]^2 (the
actor's tanh output). ``Td3Agent.to_env`` maps ``u`` affinely onto the
velocity bounds, so noise, clipping, critic inputs and replay storage all live
in the normalised space.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .neuralnet import Adam, Network, NonFiniteError, mse_loss, soft_update
from .replay import Batch
from .simworld import ANGULAR_BOUNDS, LINEAR_BOUNDS


class ScheduleError(RuntimeError):
    """An update was requested outside its schedule."""


def _check_finite(value: float, what: str, counters: dict) -> None:
    if not np.isfinite(value):
        raise NonFiniteError(f"{what} is not finite ({value}); counters={counters}")


@dataclass
class DqnConfig:
    hidden: tuple = (128, 128)
    lr: float = 1e-3
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.3
    target_sync: int = 1000
    target_tau: float | None = None
    batch_size: int = 32
    buffer_capacity: int = 20_000
    gradient_steps: int = 100


class DqnAgent:
    def __init__(self, obs_dim: int, n_actions: int, config: DqnConfig | None = None, seed: int = 0):
        self.config = config or DqnConfig()
        c = self.config
        sizes = [obs_dim, *c.hidden, n_actions]
        acts = ["relu"] * len(c.hidden) + ["linear"]
        self.q_net = Network.init(sizes, acts, seed)
        self.q_target = self.q_net.clone()
        self.opt = Adam.for_network(self.q_net, lr=c.lr)
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.epsilon = c.eps_start
        self.grad_steps = 0

    def epsilon_at(self, progress: float) -> float:
        """Linear decay from eps_start to eps_end over the first eps_decay_fraction of training."""
        c = self.config
        if c.eps_decay_fraction <= 0:
            return c.eps_end
        frac = min(max(progress / c.eps_decay_fraction, 0.0), 1.0)
        return c.eps_start + frac * (c.eps_end - c.eps_start)

    def set_progress(self, progress: float) -> None:
        self.epsilon = self.epsilon_at(progress)

    def q_values(self, obs) -> np.ndarray:
        return self.q_net(obs)

    def select_action(self, obs, rng: np.random.Generator, greedy: bool = False) -> int:
        q = self.q_values(obs)
        if q.shape != (self.n_actions,):
            raise ValueError(f"expected a single observation of length {self.obs_dim}")
        if not greedy and rng.random() < self.epsilon:
            return int(rng.integers(self.n_actions))
        return int(np.argmax(q))

    def targets(self, batch: Batch) -> np.ndarray:
        """Bellman targets r + gamma^k * (1 - done) * max_a' Q_target(s', a')."""
        q_next = self.q_target(batch.next_obs).max(axis=1)
        discount = self.config.gamma ** batch.steps
        return batch.rewards + discount * (1.0 - batch.dones) * q_next

    def train_step(self, batch: Batch) -> float:
        if len(batch) == 0:
            raise ValueError("empty batch")
        y = self.targets(batch)
        q, cache = self.q_net.forward(batch.obs, train=True)
        rows = np.arange(len(batch))
        pred = q[rows, batch.actions]
        loss, g_pred = mse_loss(pred, y)
        _check_finite(loss, "DQN loss", {"grad_steps": self.grad_steps})
        g_out = np.zeros_like(q)
        g_out[rows, batch.actions] = g_pred
        grad, _ = self.q_net.backward(cache, g_out)
        self.opt.step(self.q_net, grad)
        self.grad_steps += 1
        c = self.config
        if c.target_tau is not None:
            soft_update(self.q_target, self.q_net, c.target_tau)
        elif self.grad_steps % c.target_sync == 0:
            self.q_target.load_params(self.q_net.params)
        return loss

    def state(self) -> tuple[dict, dict]:
        nets = {"dqn.q_net": self.q_net, "dqn.q_target": self.q_target, "dqn.opt": self.opt}
        meta = {"epsilon": self.epsilon, "grad_steps": self.grad_steps, "obs_dim": self.obs_dim,
                "n_actions": self.n_actions, "config": asdict(self.config)}
        return nets, meta

    @classmethod
    def from_state(cls, entries: dict, meta: dict) -> "DqnAgent":
        cfg = dict(meta["config"])
        cfg["hidden"] = tuple(cfg["hidden"])
        agent = cls(meta["obs_dim"], meta["n_actions"], DqnConfig(**cfg))
        agent.q_net = entries["dqn.q_net"]
        agent.q_target = entries["dqn.q_target"]
        agent.opt = entries["dqn.opt"]
        agent.epsilon = meta["epsilon"]
        agent.grad_steps = meta["grad_steps"]
        return agent


@dataclass
class Td3Config:
    hidden: tuple = (128, 128)
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    expl_noise: float = 0.1
    target_noise: float = 0.2
    noise_clip: float = 0.5
    batch_size: int = 64
    buffer_capacity: int = 100_000
    gradient_steps: int = 100
    warmup_steps: int = 1000

    def __post_init__(self):
        if self.policy_delay < 1:
            raise ValueError("policy_delay must be >= 1")


ACTION_LOW = np.array([LINEAR_BOUNDS[0], ANGULAR_BOUNDS[0]])
ACTION_HIGH = np.array([LINEAR_BOUNDS[1], ANGULAR_BOUNDS[1]])


class Td3Agent:
    action_dim = 2

    def __init__(self, obs_dim: int, config: Td3Config | None = None, seed: int = 0):
        self.config = config or Td3Config()
        c = self.config
        ss = np.random.SeedSequence(seed).generate_state(3)
        hidden = list(c.hidden)
        self.actor = Network.init([obs_dim, *hidden, 2], ["relu"] * len(hidden) + ["tanh"], int(ss[0]))
        crit_sizes = [obs_dim + 2, *hidden, 1]
        crit_acts = ["relu"] * len(hidden) + ["linear"]
        self.critic1 = Network.init(crit_sizes, crit_acts, int(ss[1]))
        self.critic2 = Network.init(crit_sizes, crit_acts, int(ss[2]))
        self.actor_target = self.actor.clone()
        self.critic1_target = self.critic1.clone()
        self.critic2_target = self.critic2.clone()
        self.actor_opt = Adam.for_network(self.actor, lr=c.actor_lr)
        self.critic1_opt = Adam.for_network(self.critic1, lr=c.critic_lr)
        self.critic2_opt = Adam.for_network(self.critic2, lr=c.critic_lr)
        self.obs_dim = obs_dim
        self.critic_updates = 0
        self.actor_updates = 0

    @staticmethod
    def to_env(u) -> np.ndarray:
        u = np.clip(np.asarray(u, dtype=np.float64), -1.0, 1.0)
        return ACTION_LOW + (u + 1.0) * 0.5 * (ACTION_HIGH - ACTION_LOW)

    @staticmethod
    def from_env(a) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        return 2.0 * (a - ACTION_LOW) / (ACTION_HIGH - ACTION_LOW) - 1.0

    def act(self, obs, rng: np.random.Generator | None = None, explore: bool = False) -> np.ndarray:
        """Normalised action in [-1, 1]^2."""
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != (self.obs_dim,):
            raise ValueError(f"expected an observation of length {self.obs_dim}, got {obs.shape}")
        u = self.actor(obs)
        if explore:
            u = u + rng.normal(0.0, self.config.expl_noise, size=2)
        return np.clip(u, -1.0, 1.0)

    def select_action(self, obs, rng: np.random.Generator | None = None, explore: bool = False) -> tuple[float, float]:
        lin, ang = self.to_env(self.act(obs, rng, explore))
        return float(lin), float(ang)

    def critic_targets(self, batch: Batch, rng: np.random.Generator) -> np.ndarray:
        c = self.config
        noise = np.clip(rng.normal(0.0, c.target_noise, size=(len(batch), 2)), -c.noise_clip, c.noise_clip)
        u_next = np.clip(self.actor_target(batch.next_obs) + noise, -1.0, 1.0)
        sa = np.hstack([batch.next_obs, u_next])
        q1 = self.critic1_target(sa)[:, 0]
        q2 = self.critic2_target(sa)[:, 0]
        discount = c.gamma ** batch.steps
        return batch.rewards + discount * (1.0 - batch.dones) * np.minimum(q1, q2)

    def _regress(self, critic, opt, sa, y) -> float:
        pred, cache = critic.forward(sa, train=True)
        loss, g = mse_loss(pred[:, 0], y)
        _check_finite(loss, "critic loss", self.counters())
        grad, _ = critic.backward(cache, g[:, None])
        opt.step(critic, grad)
        return loss

    def critic_update(self, batch: Batch, rng: np.random.Generator) -> tuple[float, float]:
        if len(batch) == 0:
            raise ValueError("empty batch")
        y = self.critic_targets(batch, rng)
        sa = np.hstack([batch.obs, batch.actions])
        l1 = self._regress(self.critic1, self.critic1_opt, sa, y)
        l2 = self._regress(self.critic2, self.critic2_opt, sa, y)
        self.critic_updates += 1
        return l1, l2

    def actor_due(self) -> bool:
        return self.critic_updates >= (self.actor_updates + 1) * self.config.policy_delay

    def policy_step(self, states: np.ndarray, critic=None) -> float:
        """One deterministic policy-gradient step ascending ``critic`` (default critic1)."""
        critic = self.critic1 if critic is None else critic
        u, a_cache = self.actor.forward(states, train=True)
        q, c_cache = critic.forward(np.hstack([states, u]), train=True)
        loss = -float(np.mean(q))
        _check_finite(loss, "actor loss", self.counters())
        _, g_in = critic.backward(c_cache, np.full_like(q, -1.0 / q.size))
        grad, _ = self.actor.backward(a_cache, g_in[:, self.obs_dim:])
        self.actor_opt.step(self.actor, grad)
        return loss

    def actor_update(self, batch: Batch) -> float:
        if not self.actor_due():
            raise ScheduleError(f"actor update off schedule: {self.counters()}")
        loss = self.policy_step(batch.obs)
        tau = self.config.tau
        soft_update(self.actor_target, self.actor, tau)
        soft_update(self.critic1_target, self.critic1, tau)
        soft_update(self.critic2_target, self.critic2, tau)
        self.actor_updates += 1
        return loss

    def train_step(self, batch: Batch, rng: np.random.Generator) -> tuple[float, float, float | None]:
        l1, l2 = self.critic_update(batch, rng)
        la = self.actor_update(batch) if self.actor_due() else None
        return l1, l2, la

    def counters(self) -> dict:
        return {"critic_updates": self.critic_updates, "actor_updates": self.actor_updates}

    def state(self) -> tuple[dict, dict]:
        nets = {
            "td3.actor": self.actor, "td3.actor_target": self.actor_target,
            "td3.critic1": self.critic1, "td3.critic2": self.critic2,
            "td3.critic1_target": self.critic1_target, "td3.critic2_target": self.critic2_target,
            "td3.actor_opt": self.actor_opt, "td3.critic1_opt": self.critic1_opt,
            "td3.critic2_opt": self.critic2_opt,
        }
        meta = {"obs_dim": self.obs_dim, "config": asdict(self.config), **self.counters()}
        return nets, meta

    @classmethod
    def from_state(cls, entries: dict, meta: dict) -> "Td3Agent":
        cfg = dict(meta["config"])
        cfg["hidden"] = tuple(cfg["hidden"])
        agent = cls(meta["obs_dim"], Td3Config(**cfg))
        for name in ("actor", "actor_target", "critic1", "critic2", "critic1_target",
                     "critic2_target", "actor_opt", "critic1_opt", "critic2_opt"):
            setattr(agent, name, entries[f"td3.{name}"])
        agent.critic_updates = meta["critic_updates"]
        agent.actor_updates = meta["actor_updates"]
        return agent
