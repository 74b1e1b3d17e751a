"""Run configuration: YAML file -> validated ``RunConfig``.

Angles and angular rates in the file are in degrees (deg, deg/s) and are
converted to radians here. Precedence is command-line flags > file > defaults.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .agents import VARIANTS, AgentConfig
from .dynamics import AeroParams
from .environment import EnvConfig

OUTPUT_ENV_VAR = "SYMRL_OUT"


class ConfigError(ValueError):
    pass


def _default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV_VAR, "runs")


# key -> (default, kind). kind "deg" values are converted to radians.
TOP_KEYS = {
    "variants": (["ddpg"], "variants"),
    "seeds": ([0], "seeds"),
    "episodes": (100, "posint"),
    "output_dir": (None, "str"),
    "checkpoint_every": (0, "int"),
    "jobs": (1, "posint"),
    "write_steps": (False, "bool"),
}
ENV_KEYS = {
    "dt": (0.1, "pos"),
    "episode_len": (300, "posint"),
    "phi0_deg": (30.0, "deg"),
    "p0_deg_s": (10.0, "deg"),
    "beta0_deg": (30.0, "deg"),
    "r0_deg_s": (10.0, "deg"),
    "action_bound_deg": (math.degrees(1.0), "deg"),
    "divergence_bound_rad": (1000.0, "optfloat"),
    "reference": ("square", "str"),
    "square_period_s": (3.0, "pos"),
    "square_amplitude_deg": (30.0, "deg"),
    "sine_amplitude_deg": (20.0, "deg"),
    "sine_omega_rad_s": (0.2 * math.pi, "float"),
}
AGENT_KEYS = {
    "lr_critic": (0.001, "pos"),
    "lr_actor": (0.001, "pos"),
    "tau": (0.01, "float"),
    "gamma": (0.99, "float"),
    "batch_size": (256, "posint"),
    "buffer_capacity": (9_000_000, "posint"),
    "updates_per_step": (1, "int"),
    "warmup": (None, "optint"),
    "hidden": ([64, 64], "intlist"),
    "actor_activations": (["tanh", "relu"], "strlist"),
    "ou_sigma": (0.015, "float"),
    "ou_theta": (0.1, "float"),
    "ou_dt": (0.01, "pos"),
    "reward_mode": ("preserve", "str"),
    "x_star_deg": ([0.0, 0.0, 0.0, 0.0], "deg4"),
}
AERO_KEYS = {f.name: (f.default, "float") for f in dataclasses.fields(AeroParams)}
EVAL_KEYS = {
    "episodes": (1, "posint"),
    "seeds": ([1000], "seeds"),
}
SYMMETRY_KEYS = {
    "x_star_deg": ([0.0, 0.0, 0.0, 0.0], "deg4"),
    "pairs": (1000, "posint"),
    "identity_F": (False, "bool"),
    "tolerance": (1e-10, "pos"),
}
SECTIONS = {"env": ENV_KEYS, "agent": AGENT_KEYS, "aero": AERO_KEYS, "eval": EVAL_KEYS,
            "symmetry": SYMMETRY_KEYS}


@dataclass
class RunConfig:
    """Fully resolved configuration; ``raw`` keeps the file-facing (degree) values."""

    variants: list
    seeds: list
    episodes: int
    output_dir: str
    checkpoint_every: int
    jobs: int
    write_steps: bool
    env: EnvConfig
    agent: AgentConfig
    eval_episodes: int
    eval_seeds: list
    sym_x_star: tuple
    sym_pairs: int
    sym_identity_F: bool
    sym_tolerance: float
    raw: dict = field(default_factory=dict)


def _check(kind: str, value, where: str):
    def bad(expect):
        raise ConfigError(f"{where}: expected {expect}, got {value!r}")

    def num(v):
        return isinstance(v, (int, float)) and not isinstance(v, bool)

    if kind in ("float", "deg"):
        if not num(value):
            bad("a number")
        return float(value)
    if kind == "pos":
        if not num(value) or value <= 0:
            bad("a positive number")
        return float(value)
    if kind == "optfloat":
        if value is None:
            return None
        if not num(value) or value <= 0:
            bad("a positive number or null")
        return float(value)
    if kind in ("int", "posint", "optint"):
        if kind == "optint" and value is None:
            return None
        if not isinstance(value, int) or isinstance(value, bool) or value < (1 if kind == "posint" else 0):
            bad("a positive integer" if kind == "posint" else "a non-negative integer")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            bad("true or false")
        return value
    if kind == "str":
        if not isinstance(value, str):
            bad("a string")
        return value
    if kind == "variants":
        vals = [value] if isinstance(value, str) else value
        if not isinstance(vals, list) or not vals or any(v not in VARIANTS for v in vals):
            bad(f"a non-empty list drawn from {list(VARIANTS)}")
        return list(vals)
    if kind == "seeds":
        vals = [value] if isinstance(value, int) and not isinstance(value, bool) else value
        if not isinstance(vals, list) or not vals or any(
                not isinstance(v, int) or isinstance(v, bool) or v < 0 for v in vals):
            bad("a non-empty list of non-negative integers")
        return list(vals)
    if kind == "intlist":
        if not isinstance(value, list) or not value or any(
                not isinstance(v, int) or isinstance(v, bool) or v < 1 for v in value):
            bad("a non-empty list of positive integers")
        return list(value)
    if kind == "strlist":
        if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
            bad("a list of strings")
        return list(value)
    if kind == "deg4":
        if not isinstance(value, list) or len(value) != 4 or not all(num(v) for v in value):
            bad("a list of 4 numbers")
        return [float(v) for v in value]
    raise AssertionError(kind)


def _key_lines(text: str) -> dict:
    """Map (section, key) and (key,) to 1-based line numbers."""
    lines = {}
    root = yaml.compose(text)
    if root is None or not isinstance(root, yaml.MappingNode):
        return lines
    for knode, vnode in root.value:
        lines[(knode.value,)] = knode.start_mark.line + 1
        if isinstance(vnode, yaml.MappingNode):
            for k2, _ in vnode.value:
                lines[(knode.value, k2.value)] = k2.start_mark.line + 1
    return lines


def parse_config(text: str, source: str = "<config>", overrides: dict | None = None) -> RunConfig:
    try:
        data = yaml.safe_load(text) if text.strip() else {}
        lines = _key_lines(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{source}{line}: invalid YAML ({getattr(exc, 'problem', exc)})") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: top level must be a mapping")

    def where(*path):
        ln = lines.get(tuple(path))
        return f"{source}:{ln}: {'.'.join(path)}" if ln else f"{source}: {'.'.join(path)}"

    raw = {k: v for k, (v, _) in TOP_KEYS.items()}
    raw.update({s: {k: v for k, (v, _) in keys.items()} for s, keys in SECTIONS.items()})
    for key, value in data.items():
        if key in SECTIONS:
            if value is None:
                continue
            if not isinstance(value, dict):
                raise ConfigError(f"{where(key)}: expected a mapping")
            for k2, v2 in value.items():
                if k2 not in SECTIONS[key]:
                    raise ConfigError(f"{where(key, str(k2))}: unknown key {k2!r} in section '{key}'")
                raw[key][k2] = _check(SECTIONS[key][k2][1], v2, where(key, k2))
        elif key in TOP_KEYS:
            raw[key] = _check(TOP_KEYS[key][1], value, where(key))
        else:
            raise ConfigError(f"{where(str(key))}: unknown key {key!r}")
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = _check(TOP_KEYS[key][1], value, f"--{key}")
    if raw["output_dir"] is None:
        raw["output_dir"] = _default_output_dir()
    return _resolve(raw, source)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    if path is None:
        return parse_config("", "<defaults>", overrides)
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(), str(p), overrides)


def _resolve(raw: dict, source: str) -> RunConfig:
    e, a, s = raw["env"], raw["agent"], raw["symmetry"]
    rad = math.radians
    try:
        aero = AeroParams.from_mapping(raw["aero"])
        env = EnvConfig(
            dt=e["dt"], episode_len=e["episode_len"], phi0_range=rad(e["phi0_deg"]),
            p0_range=rad(e["p0_deg_s"]), beta0_range=rad(e["beta0_deg"]), r0_range=rad(e["r0_deg_s"]),
            action_bound=rad(e["action_bound_deg"]), divergence_bound=e["divergence_bound_rad"],
            reference=e["reference"], square_period=e["square_period_s"],
            square_amplitude=rad(e["square_amplitude_deg"]), sine_amplitude=rad(e["sine_amplitude_deg"]),
            sine_omega=e["sine_omega_rad_s"], aero=aero)
        agent = AgentConfig(
            lr_critic=a["lr_critic"], lr_actor=a["lr_actor"], tau=a["tau"], gamma=a["gamma"],
            batch_size=a["batch_size"], buffer_capacity=a["buffer_capacity"],
            updates_per_step=a["updates_per_step"], warmup=a["warmup"], hidden=tuple(a["hidden"]),
            actor_activations=tuple(a["actor_activations"]), action_bound=env.action_bound,
            ou_sigma=a["ou_sigma"], ou_theta=a["ou_theta"], ou_dt=a["ou_dt"],
            reward_mode=a["reward_mode"], x_star=tuple(rad(v) for v in a["x_star_deg"]))
        if len(agent.hidden) != len(agent.actor_activations):
            raise ValueError("agent.actor_activations needs one entry per hidden layer")
        if agent.reward_mode not in ("preserve", "negate"):
            raise ValueError(f"agent.reward_mode must be 'preserve' or 'negate', got {agent.reward_mode!r}")
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return RunConfig(
        variants=raw["variants"], seeds=raw["seeds"], episodes=raw["episodes"],
        output_dir=raw["output_dir"], checkpoint_every=raw["checkpoint_every"], jobs=raw["jobs"],
        write_steps=raw["write_steps"], env=env, agent=agent,
        eval_episodes=raw["eval"]["episodes"], eval_seeds=raw["eval"]["seeds"],
        sym_x_star=tuple(rad(v) for v in s["x_star_deg"]), sym_pairs=s["pairs"],
        sym_identity_F=s["identity_F"], sym_tolerance=s["tolerance"], raw=raw)


def _dump_value(v) -> str:
    return yaml.safe_dump(v, default_flow_style=True, width=1_000_000).strip().removesuffix("\n...").strip()


def echo_config(cfg: RunConfig) -> str:
    """Effective configuration as loadable YAML; radian equivalents as comments."""
    out = ["# effective configuration (flags > file > defaults)"]
    for key in TOP_KEYS:
        out.append(f"{key}: {_dump_value(cfg.raw[key])}")
    for section, keys in SECTIONS.items():
        out.append(f"{section}:")
        for key, (_, kind) in keys.items():
            v = cfg.raw[section][key]
            line = f"  {key}: {_dump_value(v)}"
            if kind == "deg":
                line += f"  # {math.radians(v)!r} rad"
            elif kind == "deg4":
                line += f"  # {[math.radians(x) for x in v]!r} rad"
            out.append(line)
    return "\n".join(out) + "\n"
