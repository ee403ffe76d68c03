"""Experiment orchestration: configuration, CLI, train/eval loops, metrics,
maps, and checkpoint files.

Config files are plain text, one `key = value` per line. Keys live in dotted
sections (`agent.levels = 3`); a `[section]` header line sets the prefix for
the lines after it, so both spellings work. `#` starts a comment. The full
key list is the KEYMAP table below.

Metrics are CSV with the fixed header
episode,mean_closest_distance,success_rate,explore_fraction,novelty_new_fraction,seconds.
The seconds column is 0.0 unless run.record_wall_time is on: wall time is
the one field that would break run-to-run byte identity, which matters more.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import agent as agent_mod
from . import envsim, rnd
from .agent import HacxAgent, make_agent, policy_snapshot, restore, run_episode, update
from .envsim import EnvSpec, load_spec
from .errors import CheckpointError, ConfigError

log = logging.getLogger(__name__)

METRICS_HEADER = ("episode,mean_closest_distance,success_rate,"
                  "explore_fraction,novelty_new_fraction,seconds")


@dataclass
class RunConfig:
    env: str = "four_rooms"
    levels: int = 3
    horizon: int = 10
    epsilon_level: float = 0.5
    subgoal_test_rate: float = 0.3
    tau: float = 0.6
    hidden: tuple = (64, 64)
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    relabels: int = 2
    relabel_enabled: bool = True
    rnd_code_dim: int = 16
    rnd_epsilon: float = 0.0        # 0 = auto-calibrate
    rnd_phase_episodes: int = 100
    rnd_phase_gradient_steps: int = 2000
    rnd_batch_size: int = 128
    rnd_lr: float = 1e-3
    episodes: int = 2000
    batch_size: int = 128
    rounds_per_episode: int = 40
    test_episodes: int = 50
    eval_every: int = 100
    seeds: tuple = (0, 1, 2, 3, 4)
    output_dir: str = "runs"
    record_wall_time: bool = False

    def validate(self) -> "RunConfig":
        if self.levels < 1:
            raise ConfigError(f"levels must be >= 1, got {self.levels}")
        if not (0.0 <= self.tau <= 1.0):
            raise ConfigError(f"tau must be in [0, 1], got {self.tau}")
        for name in ("horizon", "episodes", "batch_size", "test_episodes",
                     "eval_every", "rnd_phase_episodes", "rnd_code_dim"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.rounds_per_episode < 0 or self.relabels < 0:
            raise ConfigError("rounds_per_episode and relabels must be >= 0")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        return self


def _parse_bool(v: str) -> bool:
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def _parse_int_tuple(v: str) -> tuple:
    try:
        return tuple(int(p) for p in v.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"expected integers, got {v!r}")


# config key -> (RunConfig field, parser)
KEYMAP = {
    "env": ("env", str),
    "agent.levels": ("levels", int),
    "agent.horizon": ("horizon", int),
    "agent.epsilon": ("epsilon_level", float),
    "agent.subgoal_test_rate": ("subgoal_test_rate", float),
    "agent.tau": ("tau", float),
    "agent.hidden": ("hidden", _parse_int_tuple),
    "agent.actor_lr": ("actor_lr", float),
    "agent.critic_lr": ("critic_lr", float),
    "agent.relabels": ("relabels", int),
    "agent.relabel_enabled": ("relabel_enabled", _parse_bool),
    "rnd.code_dim": ("rnd_code_dim", int),
    "rnd.epsilon": ("rnd_epsilon", lambda v: 0.0 if v == "auto" else float(v)),
    "rnd.phase_episodes": ("rnd_phase_episodes", int),
    "rnd.phase_gradient_steps": ("rnd_phase_gradient_steps", int),
    "rnd.batch_size": ("rnd_batch_size", int),
    "rnd.lr": ("rnd_lr", float),
    "training.episodes": ("episodes", int),
    "training.batch_size": ("batch_size", int),
    "training.rounds_per_episode": ("rounds_per_episode", int),
    "eval.test_episodes": ("test_episodes", int),
    "eval.eval_every": ("eval_every", int),
    "run.seeds": ("seeds", _parse_int_tuple),
    "run.output_dir": ("output_dir", str),
    "run.record_wall_time": ("record_wall_time", _parse_bool),
}


def parse_config_text(text: str, base: RunConfig = None) -> RunConfig:
    cfg = base if base is not None else RunConfig()
    prefix = ""
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            prefix = line[1:-1].strip()
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"bad config line: {raw!r}")
        key, val = key.strip(), val.strip()
        full = f"{prefix}.{key}" if prefix else key
        if full not in KEYMAP:
            raise ConfigError(f"unknown config key {full!r}")
        field_name, parser = KEYMAP[full]
        try:
            cfg = replace(cfg, **{field_name: parser(val)})
        except (ValueError, TypeError) as e:
            raise ConfigError(f"bad value for {full}: {val!r} ({e})")
    return cfg


def load_config(path: str, base: RunConfig = None) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as f:
        return parse_config_text(f.read(), base)


def config_to_text(cfg: RunConfig) -> str:
    """Canonical echo of a config, readable back by parse_config_text."""
    rev = {fname: key for key, (fname, _) in KEYMAP.items()}
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = " ".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = int(v)
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{rev[f.name]} = {v}")
    return "\n".join(lines) + "\n"


def build_agent(cfg: RunConfig, spec: EnvSpec, rng: np.random.Generator) -> HacxAgent:
    return make_agent(
        spec, cfg.levels, rng, horizon=cfg.horizon, epsilon_level=cfg.epsilon_level,
        subgoal_test_rate=cfg.subgoal_test_rate, tau=cfg.tau, hidden=cfg.hidden,
        actor_lr=cfg.actor_lr, critic_lr=cfg.critic_lr, rnd_code_dim=cfg.rnd_code_dim,
        rnd_lr=cfg.rnd_lr,
        rnd_epsilon=None if cfg.rnd_epsilon == 0.0 else cfg.rnd_epsilon,
        num_relabels=cfg.relabels, relabel_enabled=cfg.relabel_enabled)


def evaluate(agent: HacxAgent, spec: EnvSpec, n_test: int,
             rng: np.random.Generator):
    """Mean closest distance and success rate over n_test test episodes."""
    if n_test < 1:
        raise ValueError("n_test must be >= 1")
    dists, succ = [], 0
    for _ in range(n_test):
        rec = run_episode(agent, spec, "test", rng)
        dists.append(rec.closest_distance)
        succ += int(rec.success)
    return float(np.mean(dists)), succ / n_test


def write_metrics(rows, path: str) -> None:
    lines = [METRICS_HEADER]
    for r in rows:
        lines.append(",".join([
            str(int(r["episode"])),
            repr(float(r["mean_closest_distance"])),
            repr(float(r["success_rate"])),
            repr(float(r["explore_fraction"])),
            repr(float(r["novelty_new_fraction"])),
            repr(float(r["seconds"])),
        ]))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_metrics(path: str) -> list:
    with open(path) as f:
        lines = [ln for ln in f.read().splitlines() if ln]
    if not lines or lines[0] != METRICS_HEADER:
        raise ConfigError(f"unrecognized metrics file {path}")
    names = lines[0].split(",")
    return [{n: (int(v) if n == "episode" else float(v))
             for n, v in zip(names, ln.split(","))} for ln in lines[1:]]


def write_checkpoint(agent: HacxAgent, path: str) -> None:
    text = policy_snapshot(agent)
    with open(path, "w") as f:
        f.write(text)


def read_checkpoint(path: str) -> HacxAgent:
    if not os.path.exists(path):
        raise ConfigError(f"checkpoint not found: {path}")
    with open(path) as f:
        return restore(f.read())


def write_maps(agent: HacxAgent, spec: EnvSpec, out_dir: str) -> None:
    with open(os.path.join(out_dir, "visits.pgm"), "wb") as f:
        f.write(envsim.grid_to_image(agent.visits))
    flags = rnd.novelty_map(agent.novelty, spec.bounds, 64)
    with open(os.path.join(out_dir, "novelty.pgm"), "wb") as f:
        f.write(envsim.bool_grid_to_image(flags))
    with open(os.path.join(out_dir, "novelty.txt"), "w") as f:
        f.write(envsim.bool_grid_to_text(flags))


def run_trial(cfg: RunConfig, seed: int, out_dir: str) -> list:
    """Train one agent for one seed; writes metrics, maps, and a checkpoint
    under out_dir and returns the metrics rows."""
    os.makedirs(out_dir, exist_ok=True)
    spec = load_spec(cfg.env)
    rng = np.random.default_rng(seed)
    agent = build_agent(cfg, spec, rng)
    rows = []
    explore_count = 0
    t0 = time.perf_counter()
    for ep_i in range(1, cfg.episodes + 1):
        rec = run_episode(agent, spec, "train", rng)
        if rec.top_policy_used == "explore":
            explore_count += 1
        diag = update(agent, cfg.rounds_per_episode, cfg.batch_size, rng)
        if ep_i % cfg.rnd_phase_episodes == 0:
            rnd.advance_phase(agent.novelty, cfg.rnd_phase_gradient_steps,
                              cfg.rnd_batch_size, rng)
        if ep_i % cfg.eval_every == 0 or ep_i == cfg.episodes:
            eval_rng = np.random.default_rng([seed, 9973, ep_i])
            mcd, sr = evaluate(agent, spec, cfg.test_episodes, eval_rng)
            nf = rnd.new_fraction(agent.novelty, spec.bounds, 64)
            rows.append({
                "episode": ep_i,
                "mean_closest_distance": mcd,
                "success_rate": sr,
                "explore_fraction": explore_count / ep_i,
                "novelty_new_fraction": nf,
                "seconds": time.perf_counter() - t0 if cfg.record_wall_time else 0.0,
            })
            for name, d in diag.items():
                if d["rounds"]:
                    log.info("episode=%d level=%s critic_loss=%.5f mean_q=%.3f "
                             "explore_fraction=%.3f", ep_i, name,
                             d["critic_loss"], d["mean_q"], explore_count / ep_i)
            log.info("episode=%d seed=%d mean_closest=%.3f success=%.2f new_frac=%.3f",
                     ep_i, seed, mcd, sr, nf)
    write_metrics(rows, os.path.join(out_dir, "metrics.csv"))
    write_checkpoint(agent, os.path.join(out_dir, "checkpoint.txt"))
    write_maps(agent, spec, out_dir)
    return rows


def run_trials(cfg: RunConfig, out_root: str = None) -> str:
    """One trial per seed, then an aggregate file with the mean and standard
    deviation of mean_closest_distance per evaluation point. Failed trials
    are reported and excluded. Returns the aggregate file path."""
    out_root = out_root or cfg.output_dir
    load_spec(cfg.env)  # fail fast on a bad environment before any trial runs
    os.makedirs(out_root, exist_ok=True)
    with open(os.path.join(out_root, "config.txt"), "w") as f:
        f.write(config_to_text(cfg))
    per_seed, failed = {}, []
    for seed in cfg.seeds:
        try:
            per_seed[seed] = run_trial(cfg, seed, os.path.join(out_root, f"seed{seed}"))
        except Exception:
            log.exception("trial for seed %d failed; excluding it", seed)
            failed.append(seed)
    if not per_seed:
        raise ConfigError("all trials failed")
    agg_path = os.path.join(out_root, "aggregate.csv")
    lines = []
    if failed:
        lines.append("# excluded_seeds = " + " ".join(str(s) for s in failed))
    lines.append("# seeds = " + " ".join(str(s) for s in per_seed))
    lines.append("episode,mean_closest_distance_mean,mean_closest_distance_std,n_trials")
    n_points = min(len(r) for r in per_seed.values())
    for j in range(n_points):
        vals = np.array([rows[j]["mean_closest_distance"] for rows in per_seed.values()])
        ep = next(iter(per_seed.values()))[j]["episode"]
        lines.append(f"{ep},{float(np.mean(vals))!r},{float(np.std(vals))!r},{len(vals)}")
    with open(agg_path, "w") as f:
        f.write("\n".join(lines) + "\n")
    return agg_path


# ---------------------------------------------------------------------------
# CLI

def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config file path")
    p.add_argument("--env", help="builtin name or geometry file")
    p.add_argument("--levels", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--seed", type=int, help="single seed (overrides --seeds)")
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--rounds", type=int, help="gradient rounds per episode")
    p.add_argument("--eval-every", type=int)
    p.add_argument("--test-episodes", type=int)
    p.add_argument("--output-dir")


def _cfg_from_args(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    for flag, fname in (("env", "env"), ("levels", "levels"),
                        ("episodes", "episodes"), ("tau", "tau"),
                        ("rounds", "rounds_per_episode"),
                        ("eval_every", "eval_every"),
                        ("test_episodes", "test_episodes"),
                        ("output_dir", "output_dir")):
        v = getattr(args, flag, None)
        if v is not None:
            cfg = replace(cfg, **{fname: v})
    if getattr(args, "seeds", None):
        cfg = replace(cfg, seeds=_parse_int_tuple(args.seeds))
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    env_dir = os.environ.get("HACX_OUTPUT_DIR")
    if env_dir:
        cfg = replace(cfg, output_dir=env_dir)
    return cfg.validate()


BASELINES = {"hac": dict(tau=0.0), "rnd": dict(levels=1), "hacx": {}}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hacx",
        description="Hierarchical goal-conditioned RL with novelty-driven exploration")
    parser.add_argument("--quiet", action="store_true", help="warnings only")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train on a task")
    _add_train_flags(p_train)

    p_base = sub.add_parser("baseline", help="train a named baseline preset")
    p_base.add_argument("preset", choices=sorted(BASELINES))
    _add_train_flags(p_base)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--env", help="override the checkpoint's environment")
    p_eval.add_argument("--test-episodes", type=int, default=50)
    p_eval.add_argument("--seed", type=int, default=0)

    p_map = sub.add_parser("map", help="emit novelty/visitation maps for a checkpoint")
    p_map.add_argument("--checkpoint", required=True)
    p_map.add_argument("--env", help="override the checkpoint's environment")
    p_map.add_argument("--output-dir", default=".")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("train", "baseline"):
            cfg = _cfg_from_args(args)
            if args.command == "baseline":
                cfg = replace(cfg, **BASELINES[args.preset]).validate()
            agg = run_trials(cfg)
            print(f"aggregate written to {agg}")
        elif args.command == "eval":
            agent = read_checkpoint(args.checkpoint)
            spec = load_spec(args.env or agent.env_name)
            rng = np.random.default_rng(args.seed)
            mcd, sr = evaluate(agent, spec, args.test_episodes, rng)
            print(f"mean_closest_distance={mcd!r} success_rate={sr!r}")
        elif args.command == "map":
            agent = read_checkpoint(args.checkpoint)
            spec = load_spec(args.env or agent.env_name)
            os.makedirs(args.output_dir, exist_ok=True)
            write_maps(agent, spec, args.output_dir)
            print(f"maps written to {args.output_dir}")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
