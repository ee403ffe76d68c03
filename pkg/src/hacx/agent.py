"""The k-level agent: a stack of goal-conditioned subgoal policies over a
primitive level, plus a goal-free exploration policy at the top that is
rewarded by the novelty model.

Each episode either pursues the task goal or explores (chosen with
probability tau). Control descends recursively: a level proposes a subgoal,
the level below gets up to H of its own actions to reach it, and the
bottom level acts in the environment. What a level stores is hindsight:
its action component is the state the subtree actually reached. Proposed
subgoals are occasionally tested (noise-free descent) and penalized when
missed. Training is deterministic-policy-gradient style on each level's own
buffer, with no target networks; critics are bounded to the feasible
sparse-reward range.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import approx, envsim, hac, rnd
from .approx import Network, Optimizer
from .envsim import EnvSpec, EnvState, VisitGrid
from .errors import CheckpointError, TrainingError
from .hac import (DISCOUNT, EXPLORE, ReplayBuffer, Transition, buffer_push,
                  exploration_transition, goal_reward, hindsight_action_transition,
                  hindsight_goal_transitions, sample_arrays, subgoal_test_transition)

log = logging.getLogger(__name__)

STATE_DIM = 4   # (x, y, vx, vy)
GOAL_DIM = 2    # (x, y)

REPLAY_CAPACITY = 1_000_000

# Quadratic penalty on normalized actor outputs during updates. Without a
# restoring force the bounded actor drifts into the tanh tails over tens of
# thousands of steps (the critic's action gradient never quite averages to
# zero), and once saturated its own gradient vanishes and it cannot recover.
ACTION_PENALTY = 0.05


@dataclass
class LevelConfig:
    level_index: int
    horizon: int
    epsilon: float
    noise_sigma: np.ndarray
    subgoal_test_rate: float
    low: np.ndarray
    high: np.ndarray


@dataclass
class LevelPolicy:
    actor: Network
    critic: Network
    buffer: ReplayBuffer
    config: LevelConfig
    actor_opt: Optimizer
    critic_opt: Optimizer
    goal_dim: int
    q_low: float
    q_high: float


@dataclass
class EpisodeRecord:
    mode: str
    top_policy_used: str
    primitive_states: list
    closest_distance: float
    success: bool
    transitions_emitted: dict


@dataclass
class HacxAgent:
    levels: list
    explore_top: LevelPolicy
    tau: float
    novelty: rnd.NoveltyModel
    visits: VisitGrid
    state_dim: int = STATE_DIM
    goal_dim: int = GOAL_DIM
    num_relabels: int = 2
    relabel_enabled: bool = True
    tau_per_action: bool = False
    env_name: str = ""

    @property
    def k(self) -> int:
        return len(self.levels)


def _noise_scale(i: int, k: int) -> float:
    """Noise grows with level: 10% of the half-range at the bottom, 20% at
    the top of a hierarchy, 15% in between."""
    if i == 0:
        return 0.1
    return 0.2 if i == k - 1 else 0.15


def _make_policy(rng, state_dim, goal_dim, low, high, sigma, cfg_kwargs,
                 hidden, actor_lr, critic_lr, q_low, q_high, capacity):
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)
    act_dim = len(low)
    actor = approx.network_init([state_dim + goal_dim, *hidden, act_dim], rng,
                                output_activation="tanh_scaled",
                                output_bounds=(low, high), final_scale=0.1)
    # identity output: the feasible value range is enforced by clamping the
    # bootstrapped values and regression targets, not by squashing (a squashed
    # output saturates at the reward-0 end and stops learning)
    critic = approx.network_init([state_dim + goal_dim + act_dim, *hidden, 1], rng)
    cfg = LevelConfig(noise_sigma=np.asarray(sigma, dtype=float) * np.ones(act_dim),
                      low=low, high=high, **cfg_kwargs)
    return LevelPolicy(actor, critic, ReplayBuffer(capacity), cfg,
                       approx.adam_optimizer(actor_lr), approx.adam_optimizer(critic_lr),
                       goal_dim, float(q_low), float(q_high))


def make_agent(spec: EnvSpec, k: int, rng: np.random.Generator,
               horizon: int = 10, epsilon_level: float = 0.5,
               subgoal_test_rate: float = 0.3, tau: float = 0.6,
               hidden=(64, 64), actor_lr: float = 1e-4, critic_lr: float = 1e-3,
               rnd_code_dim: int = 16, rnd_hidden=(32, 32), rnd_lr: float = 1e-3,
               rnd_epsilon=None, rnd_capacity: int = rnd.STATE_BUFFER_CAPACITY,
               num_relabels: int = 2, relabel_enabled: bool = True,
               tau_per_action: bool = False,
               replay_capacity: int = REPLAY_CAPACITY) -> HacxAgent:
    """Build a fresh agent for a task. All parameter draws come from rng in
    a fixed order, so agents are reproducible given the seed."""
    if k < 1:
        raise ValueError(f"need at least 1 level, got {k}")
    x0, y0, x1, y1 = spec.bounds
    sub_low, sub_high = np.array([x0, y0]), np.array([x1, y1])
    act_low = np.array([-spec.action_bounds, -spec.action_bounds])
    act_high = -act_low
    # With one level the whole episode is that level's horizon.
    h_eff_top = float(horizon if k >= 2 else spec.max_primitive_steps)

    levels = []
    for i in range(k):
        bottom = i == 0
        low, high = (act_low, act_high) if bottom else (sub_low, sub_high)
        sigma = _noise_scale(i, k) * (high - low) / 2.0
        h_eff = float(horizon) if k >= 2 else h_eff_top
        levels.append(_make_policy(
            rng, STATE_DIM, GOAL_DIM, low, high, sigma,
            dict(level_index=i, horizon=horizon, epsilon=epsilon_level,
                 subgoal_test_rate=subgoal_test_rate),
            hidden, actor_lr, critic_lr, -h_eff, 0.0, replay_capacity))

    elow, ehigh = (sub_low, sub_high) if k >= 2 else (act_low, act_high)
    esigma = 0.2 * (ehigh - elow) / 2.0
    explore_top = _make_policy(
        rng, STATE_DIM, 0, elow, ehigh, esigma,
        dict(level_index=k - 1, horizon=horizon, epsilon=epsilon_level,
             subgoal_test_rate=subgoal_test_rate),
        hidden, actor_lr, critic_lr, -h_eff_top, 0.0, replay_capacity)

    novelty = rnd.novelty_model_init(rng, code_dim=rnd_code_dim, hidden=rnd_hidden,
                                     learning_rate=rnd_lr, capacity=rnd_capacity)
    if rnd_epsilon is None:
        rnd.calibrate_epsilon(novelty, spec.bounds, rng)
    else:
        novelty.epsilon_rnd = float(rnd_epsilon)

    return HacxAgent(levels, explore_top, tau, novelty,
                     VisitGrid(spec.bounds), num_relabels=num_relabels,
                     relabel_enabled=relabel_enabled, tau_per_action=tau_per_action,
                     env_name=spec.name)


def choose_top_policy(tau: float, rng: np.random.Generator) -> str:
    return "explore" if rng.random() < tau else "goal"


def select_action(policy: LevelPolicy, state, goal, mode: str,
                  rng: np.random.Generator = None) -> np.ndarray:
    """Actor output, optionally with diagonal Gaussian noise, clipped to the
    level's bounds. goal is None (or the EXPLORE tag) for the exploration
    policy."""
    s = np.asarray(state, dtype=float)
    if policy.goal_dim:
        x = np.empty(len(s) + policy.goal_dim)
        x[:len(s)] = s
        x[len(s):] = goal
    else:
        x = s
    a = approx.forward(policy.actor, x)
    if mode == "noisy":
        a = a + rng.normal(0.0, 1.0, size=a.shape) * policy.config.noise_sigma
        a = np.clip(a, policy.config.low, policy.config.high)
    return a


def _state_vec(s: EnvState) -> np.ndarray:
    out = np.empty(4)
    out[0:2] = s.position
    out[2:4] = s.velocity
    return out


class _Episode:
    """Mutable state threaded through the level recursion."""

    def __init__(self, spec, state, task_goal, mode, top, rng, k):
        self.spec = spec
        self.state = state
        self.task_goal = task_goal
        self.mode = mode
        self.top = top
        self.rng = rng
        self.done = False
        self.primitive_states = [state]
        self.counts = {f"level{i}": 0 for i in range(k)}
        self.counts["explore"] = 0
        self.counts["relabel"] = 0
        self.segments = {i: [] for i in range(1, k)}
        self.level0_segments = []


def _check_task_goal(ep: _Episode):
    pos = ep.state.position
    if math.hypot(float(pos[0]) - ep.task_goal[0],
                  float(pos[1]) - ep.task_goal[1]) < ep.spec.epsilon_task:
        ep.done = True


def _run_level(agent: HacxAgent, ep: _Episode, i: int, goal, testing: bool):
    k = agent.k
    is_top = i == k - 1
    train = ep.mode == "train"
    attempts = 0
    segment0 = [] if i == 0 else None

    while True:
        attempts += 1
        explore_here = is_top and ep.top == "explore"
        if is_top and train and agent.tau_per_action and attempts > 1:
            ep.top = choose_top_policy(agent.tau, ep.rng)
            explore_here = ep.top == "explore"
        policy = agent.explore_top if explore_here else agent.levels[i]
        cfg = policy.config
        s_vec = _state_vec(ep.state)
        noisy = train and not testing
        action = select_action(policy, s_vec, None if explore_here else goal,
                               "noisy" if noisy else "deterministic", ep.rng)

        if i == 0:
            ep.state = envsim.env_step(ep.spec, ep.state, action)
            ns_vec = _state_vec(ep.state)
            ep.primitive_states.append(ep.state)
            if train:
                rnd.observe(agent.novelty, ns_vec)
                envsim.record_visit(agent.visits, ep.state)
            if ep.top == "goal":
                _check_task_goal(ep)
            if ep.state.steps_taken >= ep.spec.max_primitive_steps:
                ep.done = True
            reached = False
            if explore_here:
                if train:
                    t = exploration_transition(s_vec, action, ns_vec, agent.novelty)
                    buffer_push(policy.buffer, t)
                    ep.counts["explore"] += 1
                    segment0.append((s_vec, action, ns_vec))
            else:
                reward, reached = goal_reward(ns_vec[:2], goal, cfg.epsilon)
                if train:
                    t = Transition(s_vec, action, reward, ns_vec,
                                   np.asarray(goal, dtype=float),
                                   0.0 if reached else DISCOUNT)
                    buffer_push(policy.buffer, t)
                    ep.counts["level0"] += 1
                    segment0.append((s_vec, action, ns_vec))
            if ep.done:
                break
            if not is_top and (reached or attempts >= cfg.horizon):
                break
        else:
            child_testing = testing
            if train and not testing and ep.rng.random() < cfg.subgoal_test_rate:
                child_testing = True
            s_before = s_vec
            _run_level(agent, ep, i - 1, action, child_testing)
            achieved_vec = _state_vec(ep.state)
            if train:
                if explore_here:
                    hind = achieved_vec[:2].copy()
                    t = exploration_transition(s_before, hind, achieved_vec, agent.novelty)
                    buffer_push(policy.buffer, t)
                    ep.counts["explore"] += 1
                    ep.segments[i].append((s_before, hind, achieved_vec))
                else:
                    t = hindsight_action_transition(s_before, action, achieved_vec,
                                                    goal, cfg.epsilon)
                    buffer_push(policy.buffer, t)
                    ep.counts[f"level{i}"] += 1
                    ep.segments[i].append((s_before, t.action, achieved_vec))
                if child_testing:
                    child_eps = agent.levels[i - 1].config.epsilon
                    pt = subgoal_test_transition(
                        s_before, action, achieved_vec,
                        agent.levels[i - 1].config.horizon, child_eps,
                        goal=EXPLORE if explore_here else goal)
                    if pt is not None:
                        buffer_push(policy.buffer, pt)
                        ep.counts["explore" if explore_here else f"level{i}"] += 1
            if ep.done:
                break
            if not explore_here:
                _, reached_own = goal_reward(achieved_vec[:2], goal, cfg.epsilon)
                if reached_own:
                    break
            if not is_top and attempts >= cfg.horizon:
                break

    if i == 0 and train and segment0:
        ep.level0_segments.append(segment0)


def run_episode(agent: HacxAgent, spec: EnvSpec, mode: str,
                rng: np.random.Generator) -> EpisodeRecord:
    """One episode. Test mode is pure: always the goal policy, deterministic
    actions, and nothing written to buffers, novelty model, or visit grid."""
    if mode not in ("train", "test"):
        raise ValueError(f"mode must be train or test, got {mode!r}")
    train = mode == "train"
    state, task_goal = envsim.env_reset(spec, rng)
    top = choose_top_policy(agent.tau, rng) if train else "goal"
    ep = _Episode(spec, state, task_goal, mode, top, rng, agent.k)
    first_top = top

    _run_level(agent, ep, agent.k - 1, task_goal, testing=False)

    if train and agent.relabel_enabled and agent.num_relabels > 0:
        for seg in ep.level0_segments:
            for t in hindsight_goal_transitions(seg, agent.num_relabels,
                                                agent.levels[0].config.epsilon, rng):
                buffer_push(agent.levels[0].buffer, t)
                ep.counts["relabel"] += 1
        for i in range(1, agent.k):
            if ep.segments[i]:
                for t in hindsight_goal_transitions(ep.segments[i], agent.num_relabels,
                                                    agent.levels[i].config.epsilon, rng):
                    buffer_push(agent.levels[i].buffer, t)
                    ep.counts["relabel"] += 1

    positions = np.array([s.position for s in ep.primitive_states])
    closest = float(np.min(np.linalg.norm(positions - task_goal, axis=1)))
    return EpisodeRecord(mode, first_top, ep.primitive_states, closest,
                         closest < spec.epsilon_task, ep.counts)


def update(agent: HacxAgent, rounds: int = 40, batch_size: int = 128,
           rng: np.random.Generator = None) -> dict:
    """Interleaved critic and actor steps on every level's own buffer.

    Critic regresses on r + discount * q(s', g, actor(s', g)) computed from
    the current networks (no target copies), with the target clamped to the
    level's feasible value range. The actor ascends the critic's action
    gradient. Levels whose buffers hold fewer than batch_size transitions
    are skipped.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    diag = {}
    named = [(f"level{i}", p) for i, p in enumerate(agent.levels)]
    named.append(("explore", agent.explore_top))
    for name, p in named:
        if rounds < 1 or p.buffer.count < batch_size:
            diag[name] = {"critic_loss": None, "mean_q": None, "rounds": 0}
            continue
        losses, qmeans = [], []
        for _ in range(rounds):
            s, a, rew, ns, g, disc = sample_arrays(p.buffer, batch_size, rng)
            if p.goal_dim:
                sg = np.concatenate([s, g], axis=1)
                nsg = np.concatenate([ns, g], axis=1)
            else:
                sg, nsg = s, ns
            a_next = approx.forward(p.actor, nsg)
            q_next = approx.forward(p.critic, np.concatenate([nsg, a_next], axis=1))[:, 0]
            q_next = np.clip(q_next, p.q_low, p.q_high)
            y = np.clip(rew + disc * q_next, p.q_low, p.q_high)

            q_pred, trace = approx.forward_trace(p.critic,
                                                 np.concatenate([sg, a], axis=1))
            diff = q_pred[:, 0] - y
            loss = float(np.mean(diff * diff))
            if not np.isfinite(loss):
                raise TrainingError(f"{name}: non-finite critic loss")
            grads = approx.backward_trace(p.critic, trace,
                                          (2.0 * diff / batch_size)[:, None])
            approx.optimizer_step(p.critic, grads, p.critic_opt)

            a_pred, atrace = approx.forward_trace(p.actor, sg)
            qv, qtrace = approx.forward_trace(p.critic,
                                              np.concatenate([sg, a_pred], axis=1))
            cgrads = approx.backward_trace(p.critic, qtrace,
                                           np.full((batch_size, 1), 1.0 / batch_size))
            dq_da = cgrads.wrt_input[:, sg.shape[1]:]
            mid = 0.5 * (p.config.high + p.config.low)
            half = 0.5 * (p.config.high - p.config.low)
            pen = 2.0 * ACTION_PENALTY * (a_pred - mid) / (half * half * batch_size)
            agrads = approx.backward_trace(p.actor, atrace, -dq_da + pen)
            approx.optimizer_step(p.actor, agrads, p.actor_opt)

            losses.append(loss)
            qmeans.append(float(np.mean(qv)))
        diag[name] = {"critic_loss": float(np.mean(losses)),
                      "mean_q": float(np.mean(qmeans)), "rounds": rounds}
    return diag


# ---------------------------------------------------------------------------
# Snapshot serialization (text; file IO lives in harness)

MAGIC = "HACX1"


def _fmt(x) -> str:
    return repr(float(x))


def _fmt_vec(v) -> str:
    return " ".join(_fmt(x) for x in np.asarray(v, dtype=float).ravel())


def _net_lines(tag: str, net: Network) -> list:
    lines = [f"[network {tag}]",
             "sizes = " + " ".join(str(s) for s in net.layer_sizes),
             f"hidden = {net.hidden_activation}",
             f"output = {net.output_activation}"]
    if net.output_activation == "tanh_scaled":
        lines.append("out_low = " + _fmt_vec(net.output_low))
        lines.append("out_high = " + _fmt_vec(net.output_high))
    for j, (w, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"A{j} = " + _fmt_vec(w))
        lines.append(f"B{j} = " + _fmt_vec(b))
    return lines


def _opt_lines(tag: str, opt: Optimizer) -> list:
    lines = [f"[opt {tag}]", f"kind = {opt.kind}", f"lr = {_fmt(opt.learning_rate)}",
             f"beta1 = {_fmt(opt.beta1)}", f"beta2 = {_fmt(opt.beta2)}",
             f"eps = {_fmt(opt.eps)}", f"steps = {opt.step_count}"]
    if opt.m_weights:
        for j in range(len(opt.m_weights)):
            lines.append(f"MA{j} = " + _fmt_vec(opt.m_weights[j]))
            lines.append(f"MB{j} = " + _fmt_vec(opt.m_biases[j]))
            lines.append(f"VA{j} = " + _fmt_vec(opt.v_weights[j]))
            lines.append(f"VB{j} = " + _fmt_vec(opt.v_biases[j]))
    return lines


def _policy_lines(tag: str, p: LevelPolicy) -> list:
    cfg = p.config
    lines = [f"[policy {tag}]",
             f"level_index = {cfg.level_index}",
             f"horizon = {cfg.horizon}",
             f"epsilon = {_fmt(cfg.epsilon)}",
             f"subgoal_test_rate = {_fmt(cfg.subgoal_test_rate)}",
             f"goal_dim = {p.goal_dim}",
             f"q_low = {_fmt(p.q_low)}",
             f"q_high = {_fmt(p.q_high)}",
             f"capacity = {p.buffer.capacity}",
             "noise_sigma = " + _fmt_vec(cfg.noise_sigma),
             "low = " + _fmt_vec(cfg.low),
             "high = " + _fmt_vec(cfg.high)]
    lines += _net_lines(f"{tag}.actor", p.actor)
    lines += _opt_lines(f"{tag}.actor", p.actor_opt)
    lines += _net_lines(f"{tag}.critic", p.critic)
    lines += _opt_lines(f"{tag}.critic", p.critic_opt)
    return lines


def policy_snapshot(agent: HacxAgent) -> str:
    """Serialize everything needed to act and to keep training, except
    replay buffers and the novelty model's visited-state buffer (a restored
    agent starts those empty)."""
    lines = [MAGIC, "[agent]",
             f"k = {agent.k}",
             f"tau = {_fmt(agent.tau)}",
             f"state_dim = {agent.state_dim}",
             f"goal_dim = {agent.goal_dim}",
             f"num_relabels = {agent.num_relabels}",
             f"relabel_enabled = {int(agent.relabel_enabled)}",
             f"tau_per_action = {int(agent.tau_per_action)}",
             f"env_name = {agent.env_name}",
             "visit_bounds = " + _fmt_vec(agent.visits.bounds),
             f"visit_resolution = {agent.visits.resolution}"]
    for i, p in enumerate(agent.levels):
        lines += _policy_lines(f"level{i}", p)
    lines += _policy_lines("explore", agent.explore_top)
    lines += ["[rnd]",
              f"code_dim = {agent.novelty.code_dim}",
              f"epsilon_rnd = {_fmt(agent.novelty.epsilon_rnd)}",
              f"phase_index = {agent.novelty.phase_index}",
              f"state_capacity = {agent.novelty.state_buffer.shape[0]}"]
    lines += _net_lines("rnd.target", agent.novelty.target)
    lines += _net_lines("rnd.predictor", agent.novelty.predictor)
    lines += _opt_lines("rnd.predictor", agent.novelty.predictor_opt)
    lines.append("END")
    return "\n".join(lines) + "\n"


class _SnapshotReader:
    def __init__(self, text: str):
        lines = text.splitlines()
        if not lines or lines[0] != MAGIC:
            raise CheckpointError(f"bad magic; expected {MAGIC!r}")
        if "END" not in lines:
            raise CheckpointError("truncated snapshot: no END marker")
        self.sections = {}
        current = None
        for ln in lines[1:lines.index("END")]:
            ln = ln.strip()
            if not ln:
                continue
            if ln.startswith("[") and ln.endswith("]"):
                current = ln[1:-1]
                self.sections[current] = {}
            elif current is None:
                raise CheckpointError(f"stray line before any section: {ln!r}")
            else:
                key, sep, val = ln.partition("=")
                if not sep:
                    raise CheckpointError(f"bad line in [{current}]: {ln!r}")
                self.sections[current][key.strip()] = val.strip()

    def section(self, name: str) -> dict:
        if name not in self.sections:
            raise CheckpointError(f"missing section [{name}]")
        return self.sections[name]


def _parse_array(sec: dict, key: str, shape) -> np.ndarray:
    if key not in sec:
        raise CheckpointError(f"missing parameter block {key!r}")
    vals = np.array([float(v) for v in sec[key].split()], dtype=float)
    if vals.size != int(np.prod(shape)):
        raise CheckpointError(f"{key}: expected {int(np.prod(shape))} values, "
                              f"got {vals.size}")
    return vals.reshape(shape)


def _read_net(r: _SnapshotReader, tag: str) -> Network:
    sec = r.section(f"network {tag}")
    sizes = [int(v) for v in sec["sizes"].split()]
    out_act = sec["output"]
    low = high = None
    if out_act == "tanh_scaled":
        low = _parse_array(sec, "out_low", (sizes[-1],))
        high = _parse_array(sec, "out_high", (sizes[-1],))
    weights, biases = [], []
    for j in range(len(sizes) - 1):
        weights.append(_parse_array(sec, f"A{j}", (sizes[j + 1], sizes[j])))
        biases.append(_parse_array(sec, f"B{j}", (sizes[j + 1],)))
    return Network(sizes, weights, biases, sec["hidden"], out_act, low, high)


def _read_opt(r: _SnapshotReader, tag: str, net: Network) -> Optimizer:
    sec = r.section(f"opt {tag}")
    opt = Optimizer(sec["kind"], float(sec["lr"]), float(sec["beta1"]),
                    float(sec["beta2"]), float(sec["eps"]), int(sec["steps"]))
    if "MA0" in sec:
        for j, (w, b) in enumerate(zip(net.weights, net.biases)):
            opt.m_weights.append(_parse_array(sec, f"MA{j}", w.shape))
            opt.m_biases.append(_parse_array(sec, f"MB{j}", b.shape))
            opt.v_weights.append(_parse_array(sec, f"VA{j}", w.shape))
            opt.v_biases.append(_parse_array(sec, f"VB{j}", b.shape))
    return opt


def _read_policy(r: _SnapshotReader, tag: str) -> LevelPolicy:
    sec = r.section(f"policy {tag}")
    actor = _read_net(r, f"{tag}.actor")
    critic = _read_net(r, f"{tag}.critic")
    act_dim = actor.layer_sizes[-1]
    cfg = LevelConfig(int(sec["level_index"]), int(sec["horizon"]),
                      float(sec["epsilon"]),
                      _parse_array(sec, "noise_sigma", (act_dim,)),
                      float(sec["subgoal_test_rate"]),
                      _parse_array(sec, "low", (act_dim,)),
                      _parse_array(sec, "high", (act_dim,)))
    return LevelPolicy(actor, critic, ReplayBuffer(int(sec["capacity"])), cfg,
                       _read_opt(r, f"{tag}.actor", actor),
                       _read_opt(r, f"{tag}.critic", critic),
                       int(sec["goal_dim"]), float(sec["q_low"]), float(sec["q_high"]))


def restore(snapshot: str) -> HacxAgent:
    """Rebuild an agent from policy_snapshot output. Replay buffers and the
    novelty state buffer come back empty."""
    r = _SnapshotReader(snapshot)
    a = r.section("agent")
    k = int(a["k"])
    levels = [_read_policy(r, f"level{i}") for i in range(k)]
    explore_top = _read_policy(r, "explore")
    rs = r.section("rnd")
    predictor = _read_net(r, "rnd.predictor")
    novelty = rnd.NoveltyModel(
        _read_net(r, "rnd.target"), predictor,
        _read_opt(r, "rnd.predictor", predictor),
        int(rs["code_dim"]), float(rs["epsilon_rnd"]), int(rs["phase_index"]),
        state_buffer=np.zeros((int(rs["state_capacity"]), 2), dtype=np.float32))
    vb = _parse_array(a, "visit_bounds", (4,))
    visits = VisitGrid(tuple(float(v) for v in vb), int(a["visit_resolution"]))
    return HacxAgent(levels, explore_top, float(a["tau"]), novelty, visits,
                     int(a["state_dim"]), int(a["goal_dim"]),
                     int(a["num_relabels"]), bool(int(a["relabel_enabled"])),
                     bool(int(a["tau_per_action"])), a.get("env_name", ""))
