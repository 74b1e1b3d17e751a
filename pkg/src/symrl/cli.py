"""Command-line entry point: ``symrl {train,eval,compare,check-symmetry}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .agents import STEP_FIELDS, VARIANTS, Agent, RunRecord, load_actor, save_agent, train
from .config import ConfigError, RunConfig, echo_config, load_config
from .dynamics import DiscreteModel, euler_discretize
from .environment import LateralEnv
from .evaluation import average_return, online_operation_eval, sample_std, tracking_metrics
from .io import write_csv
from .networks import CheckpointError
from .symmetry import NONE, check_theorem1, sweep_symmetric_pairs

log = logging.getLogger("symrl")


# Training -------------------------------------------------------------------

RUN_HEADER = ["episode", "return", "average_return_100", "length", "buffer1_size", "buffer2_size",
              "critic1_updates", "critic2_updates", "actor_updates", "q_symmetry_gap"]


def run_csv_rows(rec: RunRecord):
    avg = average_return(rec.returns)
    for k, ret in enumerate(rec.returns):
        bufs = rec.buffer_sizes[k] + [None] * (2 - len(rec.buffer_sizes[k]))
        cu = rec.critic_updates[k] + [None] * (2 - len(rec.critic_updates[k]))
        yield [k, ret, avg[k], rec.lengths[k], bufs[0], bufs[1], cu[0], cu[1],
               rec.actor_updates[k], rec.q_symmetry[k]]


def _run_name(variant: str, seed: int) -> str:
    return f"{variant}_seed{seed}"


def run_one(cfg: RunConfig, variant: str, seed: int) -> dict:
    """Train one (variant, seed) and write its artifacts. Returns a summary."""
    out = Path(cfg.output_dir)
    name = _run_name(variant, seed)
    agent = Agent(variant, cfg.agent, seed=seed)
    env = LateralEnv(cfg.env, seed=seed)

    def checkpoint(k, rec):
        if cfg.checkpoint_every and (k + 1) % cfg.checkpoint_every == 0:
            save_agent(agent, out / "checkpoints" / f"{name}_ep{k + 1:05d}.npz", {"seed": seed, "episode": k + 1})

    rec = train(agent, env, cfg.episodes, seed=seed, on_episode=checkpoint)
    save_agent(agent, out / "checkpoints" / f"{name}_final.npz", {"seed": seed, "episode": cfg.episodes})
    write_csv(out / f"run_{name}.csv", "run", RUN_HEADER, run_csv_rows(rec))
    if cfg.write_steps:
        write_csv(out / f"steps_{name}.csv", "steps", STEP_FIELDS, rec.steps)
    return {"variant": variant, "seed": seed, "returns": rec.returns,
            "wall_time_s": rec.wall_time[-1] if rec.wall_time else 0.0}


def _run_all(cfg: RunConfig, variants) -> tuple[list[dict], list[str]]:
    jobs = [(v, s) for v in variants for s in cfg.seeds]
    results, failures = [], []
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = {pool.submit(run_one, cfg, v, s): (v, s) for v, s in jobs}
            for fut, (v, s) in futures.items():
                try:
                    results.append(fut.result())
                except Exception as exc:  # keep other runs' artifacts
                    failures.append(f"{_run_name(v, s)}: {exc!r}")
    else:
        for v, s in jobs:
            try:
                results.append(run_one(cfg, v, s))
                log.info("finished %s", _run_name(v, s))
            except Exception as exc:
                failures.append(f"{_run_name(v, s)}: {exc!r}")
    results.sort(key=lambda r: (VARIANTS.index(r["variant"]), r["seed"]))
    return results, failures


def write_curves(path, results: list[dict], variants) -> None:
    """Average-return mean/min/max across seeds for each variant."""
    curves = {}
    for v in variants:
        runs = [average_return(r["returns"]) for r in results if r["variant"] == v]
        if runs:
            n = min(len(x) for x in runs)
            curves[v] = np.array([x[:n] for x in runs])
    n = min((c.shape[1] for c in curves.values()), default=0)
    header = ["episode"] + [f"{v}_{stat}" for v in curves for stat in ("mean", "min", "max")]
    rows = []
    for k in range(n):
        row = [k]
        for c in curves.values():
            col = c[:, k]
            row += [col.mean(), col.min(), col.max()]
        rows.append(row)
    write_csv(path, "curves", header, rows)


def _prepare_output(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.effective.yaml").write_text(echo_config(cfg))
    return out


def _write_timing(out: Path, results: list[dict]) -> None:
    timing = {_run_name(r["variant"], r["seed"]): r["wall_time_s"] for r in results}
    (out / "timing.json").write_text(json.dumps(timing, indent=2) + "\n")


def cmd_train(cfg: RunConfig) -> int:
    out = _prepare_output(cfg)
    results, failures = _run_all(cfg, cfg.variants)
    if results:
        write_curves(out / "curves.csv", results, cfg.variants)
        _write_timing(out, results)
    for f in failures:
        print(f"error: run failed: {f}", file=sys.stderr)
    print(f"wrote {len(results)} run(s) to {out}")
    return 1 if failures else 0


def ordering(results: list[dict], last: int = 100) -> list[tuple[str, float]]:
    """Variants sorted best-first by the seed-mean of their final average return."""
    finals = {}
    for r in results:
        finals.setdefault(r["variant"], []).append(average_return(r["returns"], last)[-1])
    return sorted(((v, float(np.mean(x))) for v, x in finals.items()), key=lambda t: -t[1])


def cmd_compare(cfg: RunConfig) -> int:
    out = _prepare_output(cfg)
    results, failures = _run_all(cfg, VARIANTS)
    if results:
        write_curves(out / "curves.csv", results, VARIANTS)
        _write_timing(out, results)
        order = ordering(results)
        rows = []
        for rank, (v, val) in enumerate(order, start=1):
            finals = [average_return(r["returns"])[-1] for r in results if r["variant"] == v]
            rows.append([rank, v, val, min(finals), max(finals), len(finals)])
        write_csv(out / "summary.csv", "summary",
                  ["rank", "variant", "final_average_return_mean", "min", "max", "seeds"], rows)
        print("final average return (best first): "
              + " > ".join(f"{v} ({val:.1f})" for v, val in order))
    for f in failures:
        print(f"error: run failed: {f}", file=sys.stderr)
    return 1 if failures else 0


# Evaluation -----------------------------------------------------------------

def cmd_eval(cfg: RunConfig, checkpoints: list[str]) -> int:
    actors = []
    for path in checkpoints:
        try:
            actor, meta = load_actor(path)
        except (FileNotFoundError, CheckpointError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        actors.append((meta.get("variant", Path(path).stem), actor))
    groups: dict[str, list] = {}
    for label, actor in actors:
        groups.setdefault(label, []).append(actor)

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    op_rows, summary_rows, track_rows, traj_rows = [], [], [], []
    dt = cfg.env.dt
    for label, group in groups.items():
        results = [online_operation_eval(a, cfg.eval_episodes, cfg.eval_seeds, cfg.env) for a in group]
        rewards = np.concatenate([r.rewards for r in results])
        states = np.concatenate([r.states for r in results])
        refs = np.concatenate([r.refs for r in results])
        acts = np.concatenate([r.actions for r in results])
        ep_mean = np.concatenate([r.episode_mean_reward for r in results])
        tm = tracking_metrics(states, refs, acts, dt)
        for t in range(rewards.shape[1]):
            op_rows.append([label, t + 1, rewards[:, t].mean(), sample_std(rewards[:, t])])
        returns = rewards.sum(axis=1)
        summary_rows.append([label, ep_mean.mean(), sample_std(ep_mean), returns.mean(),
                             sample_std(returns), len(ep_mean)])
        for ch in ("roll", "yaw"):
            track_rows.append([label, ch, tm.iaem[ch], tm.iacm[ch], tm.n, tm.horizon])
        i = 0
        for ci, r in enumerate(results):
            for (seed, ep) in r.labels:
                for t in range(rewards.shape[1]):
                    s = states[i, t]
                    traj_rows.append([label, ci, seed, ep, t + 1, s[0], s[1], s[2], s[3], refs[i, t],
                                      s[0] - refs[i, t], acts[i, t, 0], acts[i, t, 1], rewards[i, t]])
                i += 1
    write_csv(out / "operation.csv", "operation", ["variant", "t", "mean_reward", "std_reward"], op_rows)
    write_csv(out / "operation_summary.csv", "operation_summary",
              ["variant", "mean_step_reward", "std_step_reward", "mean_return", "std_return", "n"],
              summary_rows)
    write_csv(out / "tracking.csv", "tracking", ["variant", "channel", "IAEM", "IACM", "n", "horizon"],
              track_rows)
    write_csv(out / "trajectories.csv", "trajectories",
              ["variant", "checkpoint", "seed", "episode", "t", "phi", "p", "beta", "r", "phi_ref",
               "e_phi", "delta_a", "delta_r", "reward"], traj_rows)
    for row in track_rows:
        print(f"{row[0]:>5} {row[1]:>4}: IAEM={row[2]:.4f} IACM={row[3]:.4f}")
    return 0


# Symmetry check -------------------------------------------------------------

def cmd_check_symmetry(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    model = euler_discretize(cfg.env.aero, cfg.env.dt)
    if cfg.sym_identity_F:
        model = DiscreteModel(np.eye(4), model.G, model.dt)
    x_star = np.array(cfg.sym_x_star)
    case = check_theorem1(model, x_star)
    if case == NONE:
        print("no symmetry case applies: x_star != 0 and F != I")
        return 1
    dev = sweep_symmetric_pairs(model, x_star, n=cfg.sym_pairs)
    ok = dev <= cfg.sym_tolerance
    print(f"{case}: max midpoint deviation {dev:.3e} over {cfg.sym_pairs} pairs "
          f"({time.perf_counter() - t0:.3f} s) -> {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


# Entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symrl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, run_flags=True):
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--out", dest="output_dir", help="output directory")
        if run_flags:
            sp.add_argument("--seeds", help="comma-separated seeds, e.g. 0,1,2")
            sp.add_argument("--episodes", type=int)
            sp.add_argument("--jobs", type=int)

    t = sub.add_parser("train", help="train one or more variants")
    common(t)
    t.add_argument("--variant", action="append", choices=VARIANTS, help="repeatable")
    c = sub.add_parser("compare", help="train all three variants and compare curves")
    common(c)
    e = sub.add_parser("eval", help="online operation on the sine reference")
    common(e, run_flags=False)
    e.add_argument("--checkpoint", action="append", required=True, help="repeatable")
    e.add_argument("--seeds", help="evaluation seeds, comma-separated")
    e.add_argument("--episodes", type=int, help="evaluation episodes per seed")
    s = sub.add_parser("check-symmetry", help="mirror-point sweep on the discretized model")
    common(s, run_flags=False)
    return p


def _seeds(text):
    if text is None:
        return None
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--seeds: expected comma-separated integers, got {text!r}") from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    overrides = {"output_dir": args.output_dir}
    if args.command in ("train", "compare"):
        overrides.update(seeds=_seeds(args.seeds), episodes=args.episodes, jobs=args.jobs)
        if args.command == "train":
            overrides["variants"] = args.variant
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "eval":
            seeds = _seeds(args.seeds)
            if seeds is not None:
                cfg.eval_seeds = seeds
            if args.episodes is not None:
                if args.episodes < 1:
                    raise ConfigError("--episodes: expected a positive integer")
                cfg.eval_episodes = args.episodes
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command == "train":
        return cmd_train(cfg)
    if args.command == "compare":
        return cmd_compare(cfg)
    if args.command == "eval":
        return cmd_eval(cfg, args.checkpoint)
    return cmd_check_symmetry(cfg)


if __name__ == "__main__":
    sys.exit(main())
