"""Training curves, online-operation protocol and tracking metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .environment import EnvConfig, LateralEnv


def average_return(returns, window: int = 100) -> np.ndarray:
    """Trailing mean over the last ``window`` episodes (shorter at the start)."""
    r = np.asarray(returns, dtype=float)
    if r.size == 0:
        raise ValueError("returns must be non-empty")
    c = np.concatenate([[0.0], np.cumsum(r)])
    k = np.arange(1, r.size + 1)
    lo = np.maximum(0, k - window)
    return (c[k] - c[lo]) / (k - lo)


def _integral_abs(trajectories, dt: float) -> float:
    if not dt > 0:
        raise ValueError("dt must be positive")
    arr = np.asarray(trajectories, dtype=float)
    if arr.size == 0:
        raise ValueError("no trajectories")
    if arr.ndim == 1:
        arr = arr[None, :]
    # (n, T) scalar series or (n, T, k) vector series; L1 over the last axis
    per_step = np.abs(arr) if arr.ndim == 2 else np.abs(arr).sum(axis=-1)
    return float(np.mean(per_step.sum(axis=1) * dt))


def iaem(error_trajectories, dt: float) -> float:
    """Mean over trajectories of sum_t ||e_t||_1 dt."""
    return _integral_abs(error_trajectories, dt)


def iacm(control_trajectories, dt: float) -> float:
    """Mean over trajectories of sum_t ||u_t||_1 dt."""
    return _integral_abs(control_trajectories, dt)


@dataclass
class TrackingMetrics:
    iaem: dict  # channel -> value
    iacm: dict
    n: int
    horizon: int


@dataclass
class OperationResult:
    rewards: np.ndarray          # (n, T) per-step rewards
    states: np.ndarray           # (n, T, 4) post-step raw states
    refs: np.ndarray             # (n, T)
    actions: np.ndarray          # (n, T, 2)
    episode_mean_reward: np.ndarray  # (n,)
    tracking: TrackingMetrics
    labels: list = field(default_factory=list)  # (seed, episode) per trajectory

    @property
    def mean_reward(self) -> float:
        return float(self.episode_mean_reward.mean())

    @property
    def std_reward(self) -> float:
        return sample_std(self.episode_mean_reward)

    @property
    def returns(self) -> np.ndarray:
        return self.rewards.sum(axis=1)


def sample_std(values) -> float:
    """Unbiased (n - 1) standard deviation; 0 for a single value."""
    v = np.asarray(values, dtype=float)
    return float(v.std(ddof=1)) if v.size > 1 else 0.0


def tracking_metrics(states, refs, actions, dt: float) -> TrackingMetrics:
    """Roll channel: (phi - phi_ref, delta_a). Yaw channel: (beta, delta_r)."""
    e_phi = states[:, :, 0] - refs
    beta = states[:, :, 2]
    return TrackingMetrics(
        iaem={"roll": iaem(e_phi, dt), "yaw": iaem(beta, dt)},
        iacm={"roll": iacm(actions[:, :, 0], dt), "yaw": iacm(actions[:, :, 1], dt)},
        n=states.shape[0], horizon=states.shape[1])


def online_operation_eval(actor, episodes: int, seeds, env_config: EnvConfig | None = None,
                          policy=None) -> OperationResult:
    """Run a frozen policy on the sine reference from random initial states.

    ``actor`` is an ``Mlp``; ``policy(obs, env)`` overrides it when given.
    Every (seed, episode) pair is one trajectory of ``episode_len`` steps; with
    blow-up termination the remaining steps are not logged, so evaluation
    disables it.
    """
    if episodes < 1 or not len(seeds):
        raise ValueError("need at least one episode and one seed")
    cfg = env_config or EnvConfig()
    cfg = EnvConfig(**{**cfg.__dict__, "divergence_bound": None, "reference": "sine"})
    T = cfg.episode_len
    n = episodes * len(seeds)
    rewards = np.zeros((n, T))
    states = np.zeros((n, T, 4))
    refs = np.zeros((n, T))
    actions = np.zeros((n, T, 2))
    labels = []
    i = 0
    for seed in seeds:
        env = LateralEnv(cfg, seed=seed)
        for ep in range(episodes):
            obs = env.reset()
            for t in range(T):
                if policy is not None:
                    a = policy(obs, env)
                else:
                    a = np.clip(actor.forward(obs, cache=False), -cfg.action_bound, cfg.action_bound)
                res = env.step(a)
                rewards[i, t] = res.reward
                states[i, t] = res.info["state"]
                refs[i, t] = res.info["phi_ref"]
                actions[i, t] = res.info["action"]
                obs = res.obs
            labels.append((seed, ep))
            i += 1
    return OperationResult(rewards, states, refs, actions, rewards.mean(axis=1),
                           tracking_metrics(states, refs, actions, cfg.dt), labels)
