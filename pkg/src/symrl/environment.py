"""Bank-angle tracking MDP around the lateral dynamics.

The agent observes error coordinates ``[e_phi, p, beta, r]`` with
``e_phi = phi - phi_ref``, so the mirror point of the augmentation is the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dynamics import ACTION_BOUND, AeroParams, build_continuous, rk4_step

DEG = math.pi / 180.0


@dataclass(frozen=True)
class EnvConfig:
    dt: float = 0.1
    episode_len: int = 300
    phi0_range: float = 30 * DEG
    p0_range: float = 10 * DEG
    beta0_range: float = 30 * DEG
    r0_range: float = 10 * DEG
    action_bound: float = ACTION_BOUND
    # Blow-up guard on any |state| component; None disables it. Bounded inputs
    # cannot push phi past ~500 rad within an episode, so this only catches
    # numerical divergence.
    divergence_bound: float | None = 1000.0
    reference: str = "square"
    square_period: float = 3.0
    square_amplitude: float = 30 * DEG
    sine_amplitude: float = 20 * DEG
    sine_omega: float = 0.2 * math.pi
    aero: AeroParams = field(default_factory=AeroParams)

    def __post_init__(self):
        if self.episode_len <= 0:
            raise ValueError("episode_len must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        for name in ("phi0_range", "p0_range", "beta0_range", "r0_range", "action_bound"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.reference not in ("square", "sine"):
            raise ValueError(f"unknown reference kind {self.reference!r}")

    @property
    def init_ranges(self) -> np.ndarray:
        return np.array([self.phi0_range, self.p0_range, self.beta0_range, self.r0_range])


class ReferenceSignal:
    """Bank-angle reference.

    ``square``: piecewise constant over periods of ``period_steps`` steps, with
    the amplitude of period k drawn from U(-A, A) the first time it is needed.
    Amplitudes are drawn in period order, so values do not depend on the
    order in which steps are queried.

    ``sine``: ``amplitude * sin(omega * t * dt)``.
    """

    def __init__(self, kind: str, dt: float, rng: np.random.Generator | None = None, *,
                 square_period: float = 3.0, square_amplitude: float = 30 * DEG,
                 sine_amplitude: float = 20 * DEG, sine_omega: float = 0.2 * math.pi):
        if kind not in ("square", "sine"):
            raise ValueError(f"unknown reference kind {kind!r}")
        self.kind = kind
        self.dt = dt
        self.period_steps = max(1, int(round(square_period / dt)))
        self.square_amplitude = square_amplitude
        self.sine_amplitude = sine_amplitude
        self.sine_omega = sine_omega
        self._rng = rng if rng is not None else np.random.default_rng()
        self._amplitudes: list[float] = []

    @classmethod
    def from_config(cls, cfg: EnvConfig, rng: np.random.Generator | None = None, kind: str | None = None):
        return cls(kind or cfg.reference, cfg.dt, rng, square_period=cfg.square_period,
                   square_amplitude=cfg.square_amplitude, sine_amplitude=cfg.sine_amplitude,
                   sine_omega=cfg.sine_omega)

    def restart(self) -> None:
        self._amplitudes.clear()

    def __call__(self, t: int) -> float:
        return reference_at(t, self)


def reference_at(t: int, signal: ReferenceSignal, rng: np.random.Generator | None = None) -> float:
    if t < 0:
        raise ValueError("t must be non-negative")
    if signal.kind == "sine":
        return signal.sine_amplitude * math.sin(signal.sine_omega * t * signal.dt)
    gen = rng if rng is not None else signal._rng
    k = t // signal.period_steps
    while len(signal._amplitudes) <= k:
        a = signal.square_amplitude
        signal._amplitudes.append(float(gen.uniform(-a, a)))
    return signal._amplitudes[k]


def reward(e_phi: float, e_beta: float, p: float, r: float, delta_a: float, delta_r: float) -> float:
    """Per-step tracking reward; always <= 0."""
    c_phi = min(1.0, max(-1.0, 5.0 * e_phi))
    c_beta = min(1.0, max(-1.0, 5.0 * e_beta))
    return -(10.0 * (abs(c_phi) + abs(c_beta)) + abs(p) + abs(r)
             + 0.01 * abs(delta_a) + 0.01 * abs(delta_r))


def reward_from_obs(obs, action) -> float:
    """Reward of a transition given its post-step observation and action."""
    return reward(obs[0], obs[2], obs[1], obs[3], action[0], action[1])


class StepResult(NamedTuple):
    obs: np.ndarray
    reward: float
    done: bool
    info: dict


class EpisodeOver(RuntimeError):
    pass


class LateralEnv:
    """Single-episode-at-a-time tracking environment.

    Timeouts end the episode (``truncated`` in ``info``) without setting
    ``done``; ``done`` marks a state blow-up only.
    """

    def __init__(self, config: EnvConfig | None = None, seed: int | None = None,
                 reference: str | None = None):
        self.config = config or EnvConfig()
        self.model = build_continuous(self.config.aero)
        self.reference_kind = reference or self.config.reference
        self.seed(seed)
        self.state = np.zeros(4)
        self.t = 0
        self._active = False

    def seed(self, seed: int | None) -> None:
        init_ss, ref_ss = np.random.SeedSequence(seed).spawn(2)
        self._init_rng = np.random.default_rng(init_ss)
        self._ref_rng = np.random.default_rng(ref_ss)
        self.reference = ReferenceSignal.from_config(self.config, self._ref_rng, self.reference_kind)

    def observe(self) -> np.ndarray:
        obs = self.state.copy()
        obs[0] -= self.reference(self.t)
        return obs

    def reset(self, state=None) -> np.ndarray:
        """Start an episode from a uniform random state (or the given one)."""
        if state is None:
            lim = self.config.init_ranges
            self.state = self._init_rng.uniform(-lim, lim)
        else:
            self.state = np.array(state, dtype=float)
        self.reference.restart()
        self.t = 0
        self._active = True
        return self.observe()

    def clamp(self, action) -> np.ndarray:
        b = self.config.action_bound
        return np.clip(np.asarray(action, dtype=float), -b, b)

    def step(self, action) -> StepResult:
        if not self._active:
            raise EpisodeOver("episode finished; call reset() first")
        u = self.clamp(action)
        self.state = rk4_step(self.model, self.state, u, self.config.dt)
        self.t += 1
        ref = self.reference(self.t)
        obs = self.state.copy()
        obs[0] -= ref
        rew = reward_from_obs(obs, u)
        bound = self.config.divergence_bound
        done = bool(bound is not None and np.any(np.abs(self.state) > bound))
        truncated = self.t >= self.config.episode_len
        if done or truncated:
            self._active = False
        info = {"state": self.state.copy(), "phi_ref": ref, "action": u, "truncated": truncated, "t": self.t}
        return StepResult(obs, rew, done, info)
