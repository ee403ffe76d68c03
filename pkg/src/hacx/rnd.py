"""Novelty model: a frozen random target network and a trained predictor.

A state is "new" while the predictor's code for it still disagrees with the
target's by more than a threshold. The reward is binary: 0 for new states,
-1 otherwise. The predictor is only trained in one large batch update at
phase boundaries (advance_phase); between phases the reward is a frozen,
pure function of the state, which is what makes the shrinking-novelty
curriculum well defined.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import approx
from .approx import Network, Optimizer

log = logging.getLogger(__name__)

STATE_BUFFER_CAPACITY = 200_000


def project_novelty(state) -> np.ndarray:
    """h(s): the novelty networks see only the (x, y) position."""
    s = np.asarray(state, dtype=float)
    return s[..., :2]


@dataclass
class NoveltyModel:
    target: Network
    predictor: Network
    predictor_opt: Optimizer
    code_dim: int
    epsilon_rnd: float
    phase_index: int = 0
    state_buffer: np.ndarray = None
    buffer_count: int = 0
    buffer_next: int = 0

    def __post_init__(self):
        if self.state_buffer is None:
            self.state_buffer = np.zeros((STATE_BUFFER_CAPACITY, 2), dtype=np.float32)


def novelty_model_init(rng: np.random.Generator, code_dim: int = 16,
                       hidden=(32, 32), epsilon_rnd: float = 0.1,
                       learning_rate: float = 1e-3,
                       capacity: int = STATE_BUFFER_CAPACITY) -> NoveltyModel:
    sizes = [2, *hidden, code_dim]
    target = approx.network_init(sizes, rng)
    predictor = approx.network_init(sizes, rng)
    model = NoveltyModel(target, predictor, approx.adam_optimizer(learning_rate),
                         code_dim, epsilon_rnd,
                         state_buffer=np.zeros((capacity, 2), dtype=np.float32))
    return model


def calibrate_epsilon(model: NoveltyModel, bounds, rng: np.random.Generator,
                      n_states: int = 1000, percentile: float = 5.0) -> float:
    """Set the novelty threshold to a low percentile of the error over
    uniform random states, so that initially (nearly) everything is new."""
    x0, y0, x1, y1 = bounds
    pts = np.column_stack([rng.uniform(x0, x1, n_states), rng.uniform(y0, y1, n_states)])
    errs = novelty_errors(model, pts)
    model.epsilon_rnd = float(np.percentile(errs, percentile))
    return model.epsilon_rnd


def novelty_errors(model: NoveltyModel, points: np.ndarray) -> np.ndarray:
    """Euclidean distance between predictor and target codes, batched."""
    pts = np.asarray(points, dtype=float)
    diff = approx.forward(model.predictor, pts) - approx.forward(model.target, pts)
    return np.linalg.norm(diff, axis=-1)


def novelty_error(model: NoveltyModel, state) -> float:
    return float(novelty_errors(model, project_novelty(state)[None, :])[0])


def exploration_reward(model: NoveltyModel, state_next):
    """(reward, new): reward 0 when the state is new (error strictly above
    the threshold), -1 otherwise. Never trains anything."""
    new = novelty_error(model, state_next) > model.epsilon_rnd
    return (0.0 if new else -1.0), bool(new)


def observe(model: NoveltyModel, state) -> NoveltyModel:
    """Record h(s) into the ring buffer of visited states."""
    model.state_buffer[model.buffer_next] = project_novelty(state)
    cap = model.state_buffer.shape[0]
    model.buffer_next = (model.buffer_next + 1) % cap
    model.buffer_count = min(model.buffer_count + 1, cap)
    return model


def advance_phase(model: NoveltyModel, gradient_steps: int = 2000,
                  batch_size: int = 128, rng: np.random.Generator = None) -> NoveltyModel:
    """End the current curriculum phase: one large predictor update toward
    the target on states visited so far, then bump the phase counter.

    With an empty buffer this is a no-op (warning logged, no counter bump).
    """
    if model.buffer_count == 0:
        log.warning("advance_phase called with empty state buffer; skipping")
        return model
    if rng is None:
        rng = np.random.default_rng(0)
    d = model.code_dim
    for _ in range(gradient_steps):
        idx = rng.integers(0, model.buffer_count, batch_size)
        pts = model.state_buffer[idx].astype(float)
        target_codes = approx.forward(model.target, pts)
        pred_codes, trace = approx.forward_trace(model.predictor, pts)
        diff = pred_codes - target_codes
        grads = approx.backward_trace(model.predictor, trace,
                                      2.0 * diff / (batch_size * d))
        approx.optimizer_step(model.predictor, grads, model.predictor_opt)
    model.phase_index += 1
    return model


def novelty_map(model: NoveltyModel, bounds, resolution: int = 64) -> np.ndarray:
    """Boolean [ix, iy] grid of the new-flag at each cell center."""
    x0, y0, x1, y1 = bounds
    cx = x0 + (np.arange(resolution) + 0.5) / resolution * (x1 - x0)
    cy = y0 + (np.arange(resolution) + 0.5) / resolution * (y1 - y0)
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    errs = novelty_errors(model, pts)
    return (errs > model.epsilon_rnd).reshape(resolution, resolution)


def new_fraction(model: NoveltyModel, bounds, resolution: int = 64) -> float:
    return float(novelty_map(model, bounds, resolution).mean())


def target_checksum(model: NoveltyModel) -> float:
    """Cheap fingerprint of the frozen target parameters."""
    return float(sum(np.abs(a).sum() for a in approx.parameter_arrays(model.target)))
