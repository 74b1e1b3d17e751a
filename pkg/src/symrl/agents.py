"""DDPG and its two symmetry-integrated variants.

* ``ddpg``: one critic, one replay buffer.
* ``sda``: one critic; every explored transition and its mirror image go
  into the same buffer.
* ``sca``: explored transitions train critic 1, mirrored ones train critic 2;
  the shared actor takes one policy-improvement step through each critic
  per update (two-step approximate policy iteration).

Rewards are negative costs and the actor *maximizes* Q, which is the same
thing as minimizing the accumulated cost.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .environment import LateralEnv
from .networks import AdamState, Mlp, OuNoise, actor_net, adam_step, critic_net, soft_update
from .symmetry import AugmentationMap, Transition, augment, q_symmetry_gap

VARIANTS = ("ddpg", "sda", "sca")


class Batch(NamedTuple):
    x: np.ndarray       # (N, 4)
    a: np.ndarray       # (N, 2)
    r: np.ndarray       # (N,)
    x_next: np.ndarray  # (N, 4)
    done: np.ndarray    # (N,) float 0/1

    @property
    def n(self) -> int:
        return len(self.r)


class ReplayBuffer:
    """Ring buffer of transitions.

    Storage grows geometrically up to ``capacity`` instead of being
    preallocated (the default capacity would need ~0.9 GB per buffer).
    """

    _WIDTH = 4 + 2 + 1 + 4 + 1

    def __init__(self, capacity: int = 9_000_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._data = np.empty((min(self.capacity, 4096), self._WIDTH))
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, s: Transition) -> None:
        if self.cursor >= len(self._data):
            grown = np.empty((min(self.capacity, 2 * len(self._data)), self._WIDTH))
            grown[: len(self._data)] = self._data
            self._data = grown
        row = self._data[self.cursor]
        row[0:4] = s.x
        row[4:6] = s.a
        row[6] = s.r
        row[7:11] = s.x_next
        row[11] = float(s.done)
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n > self.size:
            raise ValueError(f"cannot draw {n} distinct samples from {self.size}")
        return rng.choice(self.size, size=n, replace=False)

    def get(self, idx) -> Batch:
        d = self._data[idx]
        return Batch(d[:, 0:4], d[:, 4:6], d[:, 6], d[:, 7:11], d[:, 11])

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        return self.get(self.sample_indices(n, rng))

    def transition(self, i: int) -> Transition:
        d = self._data[i]
        return Transition(d[0:4].copy(), d[4:6].copy(), float(d[6]), d[7:11].copy(), bool(d[11]))


@dataclass(frozen=True)
class AgentConfig:
    lr_critic: float = 0.001
    lr_actor: float = 0.001
    tau: float = 0.01
    gamma: float = 0.99
    batch_size: int = 256
    buffer_capacity: int = 9_000_000
    updates_per_step: int = 1
    # minimum buffer fill before updates; None means one batch
    warmup: int | None = None
    hidden: tuple = (64, 64)
    actor_activations: tuple = ("tanh", "relu")
    action_bound: float = 1.0
    ou_sigma: float = 0.015
    ou_theta: float = 0.1
    ou_dt: float = 0.01
    reward_mode: str = "preserve"
    x_star: tuple = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr_critic <= 0 or self.lr_actor <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        object.__setattr__(self, "hidden", tuple(self.hidden))
        object.__setattr__(self, "actor_activations", tuple(self.actor_activations))
        object.__setattr__(self, "x_star", tuple(float(v) for v in self.x_star))

    @property
    def min_fill(self) -> int:
        return self.batch_size if self.warmup is None else max(self.warmup, self.batch_size)


@dataclass
class CriticSlot:
    net: Mlp
    target: Mlp
    opt: AdamState
    buffer: ReplayBuffer
    updates: int = 0


class Agent:
    """Networks, buffers, exploration noise and counters of one learner."""

    def __init__(self, variant: str, config: AgentConfig | None = None, seed: int | None = None):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
        self.variant = variant
        self.config = cfg = config or AgentConfig()
        init_ss, run_ss = np.random.SeedSequence(seed).spawn(2)
        init_rng = np.random.default_rng(init_ss)
        self.seed_rng(run_ss)
        self.actor = actor_net(hidden=cfg.hidden, hidden_activations=cfg.actor_activations,
                               bound=cfg.action_bound).init(init_rng)
        self.actor_target = self.actor.copy()
        self.actor_opt = AdamState.zeros_like(self.actor.params, cfg.lr_actor)
        self.actor_updates = 0
        n_critics = 2 if variant == "sca" else 1
        self.critics = []
        for _ in range(n_critics):
            net = critic_net(hidden=cfg.hidden).init(init_rng)
            self.critics.append(CriticSlot(net, net.copy(), AdamState.zeros_like(net.params, cfg.lr_critic),
                                           ReplayBuffer(cfg.buffer_capacity)))
        self.noise = OuNoise(cfg.ou_sigma, cfg.ou_theta, cfg.ou_dt)
        self.aug_map = AugmentationMap(np.array(cfg.x_star), cfg.reward_mode)

    def seed_rng(self, seed) -> None:
        noise_ss, sample_ss = np.random.SeedSequence(seed).spawn(2) if not isinstance(
            seed, np.random.SeedSequence) else seed.spawn(2)
        self.noise_rng = np.random.default_rng(noise_ss)
        self.sample_rng = np.random.default_rng(sample_ss)

    @property
    def buffers(self) -> list[ReplayBuffer]:
        return [c.buffer for c in self.critics]

    @property
    def critic_updates(self) -> list[int]:
        return [c.updates for c in self.critics]

    def ready(self) -> bool:
        return all(b.size >= self.config.min_fill for b in self.buffers)

    def update(self) -> None:
        """One update step on freshly sampled batches."""
        n = self.config.batch_size
        if not self.ready():
            raise ValueError(f"need >= {self.config.min_fill} stored samples per buffer before updating")
        if self.variant == "sca":
            b1 = self.critics[0].buffer.sample(n, self.sample_rng)
            b2 = self.critics[1].buffer.sample(n, self.sample_rng)
            sca_update(self, b1, b2)
        else:
            ddpg_update(self, self.critics[0].buffer.sample(n, self.sample_rng))


def act(agent: Agent, obs, explore: bool) -> np.ndarray:
    mu = agent.actor.forward(obs, cache=False)
    if explore:
        mu = mu + agent.noise.sample(agent.noise_rng)
    b = agent.config.action_bound
    return np.clip(mu, -b, b)


def store(agent: Agent, s: Transition) -> None:
    mirrored = augment(s, agent.aug_map) if agent.variant != "ddpg" else None
    if agent.variant == "ddpg":
        agent.critics[0].buffer.add(s)
    elif agent.variant == "sda":
        agent.critics[0].buffer.add(s)
        agent.critics[0].buffer.add(mirrored)
    else:
        agent.critics[0].buffer.add(s)
        agent.critics[1].buffer.add(mirrored)


def bellman_target(critic_target: Mlp, actor_target: Mlp, batch: Batch, gamma: float) -> np.ndarray:
    if batch.n == 0:
        raise ValueError("empty batch")
    a_next = actor_target.forward(batch.x_next, cache=False)
    q_next = critic_target.forward(np.hstack([batch.x_next, a_next]), cache=False)[:, 0]
    return batch.r + gamma * (1.0 - batch.done) * q_next


def _critic_step(slot: CriticSlot, batch: Batch, z: np.ndarray) -> float:
    n = batch.n
    q = slot.net.forward(np.hstack([batch.x, batch.a]))[:, 0]
    err = q - z
    grad, _ = slot.net.backward((2.0 / n) * err[:, None])
    adam_step(slot.net.params, grad, slot.opt)
    slot.updates += 1
    return float(np.mean(err * err))


def _actor_step(agent: Agent, critic: Mlp, x: np.ndarray) -> None:
    n = len(x)
    a = agent.actor.forward(x)
    critic.forward(np.hstack([x, a]))
    _, g_in = critic.backward(np.full((n, 1), -1.0 / n), param_grads=False)
    grad, _ = agent.actor.backward(g_in[:, x.shape[1]:])
    adam_step(agent.actor.params, grad, agent.actor_opt)
    agent.actor_updates += 1


def _policy_iteration(agent: Agent, slot: CriticSlot, batch: Batch) -> float:
    cfg = agent.config
    z = bellman_target(slot.target, agent.actor_target, batch, cfg.gamma)
    loss = _critic_step(slot, batch, z)
    _actor_step(agent, slot.net, batch.x)
    soft_update(slot.target, slot.net, cfg.tau)
    soft_update(agent.actor_target, agent.actor, cfg.tau)
    return loss


def ddpg_update(agent: Agent, batch: Batch) -> float:
    """Critic regression, actor ascent through the critic, Polyak targets."""
    if batch.n < 1:
        raise ValueError("empty batch")
    return _policy_iteration(agent, agent.critics[0], batch)


def sca_update(agent: Agent, batch1: Batch, batch2: Batch) -> tuple[float, float]:
    """Two-step policy iteration: explored batch via critic 1, then mirrored batch via critic 2."""
    if agent.variant != "sca":
        raise ValueError("sca_update needs an sca agent")
    if batch1.n < 1 or batch2.n < 1:
        raise ValueError("empty batch")
    loss1 = _policy_iteration(agent, agent.critics[0], batch1)
    loss2 = _policy_iteration(agent, agent.critics[1], batch2)
    return loss1, loss2


# Training -------------------------------------------------------------------

STEP_FIELDS = ("episode", "t", "phi", "p", "beta", "r", "phi_ref", "e_phi", "delta_a", "delta_r",
               "reward", "done")


@dataclass
class RunRecord:
    variant: str
    seed: int | None
    config: dict = field(default_factory=dict)
    returns: list = field(default_factory=list)
    lengths: list = field(default_factory=list)
    buffer_sizes: list = field(default_factory=list)
    critic_updates: list = field(default_factory=list)
    actor_updates: list = field(default_factory=list)
    q_symmetry: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    steps: list = field(default_factory=list)  # rows of STEP_FIELDS

    def step_array(self) -> np.ndarray:
        return np.array(self.steps, dtype=float).reshape(-1, len(STEP_FIELDS))

    def same_results(self, other: "RunRecord") -> bool:
        """Equality of everything except wall-clock timings."""
        skip = {"wall_time"}
        a = {k: v for k, v in asdict(self).items() if k not in skip}
        b = {k: v for k, v in asdict(other).items() if k not in skip}
        return a == b


def probe_set(n: int = 64, seed: int = 12345) -> tuple[np.ndarray, np.ndarray]:
    """Fixed (obs, action) probes for the Q-symmetry diagnostic."""
    rng = np.random.default_rng(seed)
    lim = np.array([0.5236, 0.1745, 0.5236, 0.1745])
    return rng.uniform(-lim, lim, (n, 4)), rng.uniform(-1, 1, (n, 2))


def train(agent: Agent, env: LateralEnv, episodes: int, seed: int | None = None,
          train: bool = True, on_episode=None) -> RunRecord:
    """Interact for ``episodes`` episodes, updating once per env step after warmup.

    With ``seed`` given, the environment and the agent's noise/sampling
    streams are reseeded first, so (agent init seed, seed) fixes the run.
    ``on_episode(k, record)`` is called after each episode.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if seed is not None:
        env.seed(seed)
        agent.seed_rng(seed)
    record = RunRecord(agent.variant, seed, {"agent": asdict(agent.config)})
    probes = probe_set()
    updates = agent.config.updates_per_step if train else 0
    t0 = time.perf_counter()
    for k in range(episodes):
        obs = env.reset()
        agent.noise.reset()
        total = 0.0
        n = 0
        while True:
            a = act(agent, obs, explore=True)
            res = env.step(a)
            u = res.info["action"]
            store(agent, Transition(obs, u, res.reward, res.obs, res.done))
            for _ in range(updates):
                if agent.ready():
                    agent.update()
            total += res.reward
            n += 1
            st = res.info["state"]
            record.steps.append((k, res.info["t"], st[0], st[1], st[2], st[3], res.info["phi_ref"],
                                 res.obs[0], u[0], u[1], res.reward, float(res.done)))
            obs = res.obs
            if res.done or res.info["truncated"]:
                break
        record.returns.append(total)
        record.lengths.append(n)
        record.buffer_sizes.append([b.size for b in agent.buffers])
        record.critic_updates.append(agent.critic_updates)
        record.actor_updates.append(agent.actor_updates)
        record.q_symmetry.append(q_symmetry_gap(agent.critics[0].net, *probes))
        record.wall_time.append(time.perf_counter() - t0)
        if on_episode is not None:
            on_episode(k, record)
    return record


# Checkpoint glue ------------------------------------------------------------

def agent_networks(agent: Agent) -> tuple[dict, dict]:
    nets = {"actor": agent.actor, "actor_target": agent.actor_target}
    opts = {"actor": agent.actor_opt}
    for i, c in enumerate(agent.critics, start=1):
        nets[f"critic{i}"] = c.net
        nets[f"critic{i}_target"] = c.target
        opts[f"critic{i}"] = c.opt
    return nets, opts


def save_agent(agent: Agent, path, extra: dict | None = None):
    from .networks import save_checkpoint

    nets, opts = agent_networks(agent)
    meta = {"variant": agent.variant, "agent_config": asdict(agent.config),
            "actor_updates": agent.actor_updates, "critic_updates": agent.critic_updates}
    meta.update(extra or {})
    return save_checkpoint(path, nets, opts, meta)


def load_actor(path) -> tuple[Mlp, dict]:
    """Actor network and metadata of a checkpoint."""
    from .networks import CheckpointError, load_checkpoint

    nets, _, meta = load_checkpoint(path)
    if "actor" not in nets:
        raise CheckpointError(f"{path}: no actor network in checkpoint")
    return nets["actor"], meta
