"""Dense feedforward function approximation with hand-written reverse-mode
gradients and first-order optimizers (sgd, adam).

Inputs may be single vectors of shape (d,) or batches of shape (n, d).
For batched inputs the parameter gradients are summed over the batch; the
caller scales the upstream gradient to get means.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError, TrainingError

HIDDEN_ACTIVATIONS = ("relu", "tanh")
OUTPUT_ACTIVATIONS = ("identity", "tanh_scaled")


@dataclass
class Network:
    """A stack of affine layers: weights[i] has shape (sizes[i+1], sizes[i]).

    ``tanh_scaled`` output maps tanh(z) affinely onto [output_low, output_high]
    per dimension, so outputs can never leave those bounds.
    """

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "relu"
    output_activation: str = "identity"
    output_low: np.ndarray | None = None
    output_high: np.ndarray | None = None

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class GradientSet:
    """Per-parameter gradients, shape-congruent with a Network, plus the
    gradient with respect to the network input."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    wrt_input: np.ndarray


@dataclass
class Optimizer:
    """First-order optimizer state. ``kind`` is "sgd" or "adam"."""

    kind: str
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m_weights: list[np.ndarray] = field(default_factory=list)
    m_biases: list[np.ndarray] = field(default_factory=list)
    v_weights: list[np.ndarray] = field(default_factory=list)
    v_biases: list[np.ndarray] = field(default_factory=list)


def network_init(
    layer_sizes: list[int],
    rng: np.random.Generator,
    hidden_activation: str = "relu",
    output_activation: str = "identity",
    output_bounds: tuple | None = None,
    final_scale: float = 1.0,
) -> Network:
    """Create a network with uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) parameters.

    ``output_bounds`` is a (low, high) pair (scalars or per-dimension arrays),
    required for tanh_scaled output. ``final_scale`` multiplies the last
    layer's parameters; actors use 0.1 to start near the bounds' midpoint.
    """
    if len(layer_sizes) < 2:
        raise ConfigError(f"need at least 2 layer sizes, got {layer_sizes}")
    if any((not isinstance(s, (int, np.integer))) or s <= 0 for s in layer_sizes):
        raise ConfigError(f"layer sizes must be positive integers, got {layer_sizes}")
    if hidden_activation not in HIDDEN_ACTIVATIONS:
        raise ConfigError(f"unknown hidden activation {hidden_activation!r}")
    if output_activation not in OUTPUT_ACTIVATIONS:
        raise ConfigError(f"unknown output activation {output_activation!r}")

    out_dim = layer_sizes[-1]
    low = high = None
    if output_activation == "tanh_scaled":
        if output_bounds is None:
            raise ConfigError("tanh_scaled output requires output_bounds=(low, high)")
        low = np.broadcast_to(np.asarray(output_bounds[0], dtype=float), (out_dim,)).copy()
        high = np.broadcast_to(np.asarray(output_bounds[1], dtype=float), (out_dim,)).copy()
        if not (np.all(np.isfinite(low)) and np.all(np.isfinite(high)) and np.all(low < high)):
            raise ConfigError(f"invalid output bounds low={low} high={high}")

    weights, biases = [], []
    n_layers = len(layer_sizes) - 1
    for i in range(n_layers):
        fan_in = layer_sizes[i]
        limit = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-limit, limit, size=(layer_sizes[i + 1], fan_in))
        b = rng.uniform(-limit, limit, size=layer_sizes[i + 1])
        if i == n_layers - 1 and final_scale != 1.0:
            w *= final_scale
            b *= final_scale
        weights.append(w)
        biases.append(b)
    return Network(list(layer_sizes), weights, biases, hidden_activation,
                   output_activation, low, high)


def _hidden(net: Network, z: np.ndarray) -> np.ndarray:
    if net.hidden_activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _hidden_grad(net: Network, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if net.hidden_activation == "relu":
        return (z > 0.0).astype(float)
    return 1.0 - a * a


def forward_trace(net: Network, x: np.ndarray):
    """Forward pass that keeps intermediate values for backward_trace.

    Returns (output, trace). Input may be (d,) or (n, d); output matches.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != net.input_dim:
        raise ShapeError(f"input shape {x.shape} incompatible with input dim {net.input_dim}")

    pre, act = [], [xb]
    a = xb
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        pre.append(z)
        if i < last:
            a = _hidden(net, z)
        elif net.output_activation == "tanh_scaled":
            t = np.tanh(z)
            mid = 0.5 * (net.output_high + net.output_low)
            half = 0.5 * (net.output_high - net.output_low)
            a = mid + half * t
        else:
            a = z
        act.append(a)
    out = act[-1][0] if single else act[-1]
    return out, (single, pre, act)


def forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Evaluate the network; pure function of (net, x)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        # single-sample fast path, no trace bookkeeping
        if x.shape[0] != net.input_dim:
            raise ShapeError(f"input shape {x.shape} incompatible with "
                             f"input dim {net.input_dim}")
        a = x
        last = len(net.weights) - 1
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            z = w.dot(a) + b
            if i < last:
                a = np.maximum(z, 0.0) if net.hidden_activation == "relu" else np.tanh(z)
            elif net.output_activation == "tanh_scaled":
                t = np.tanh(z)
                a = 0.5 * (net.output_high + net.output_low) \
                    + 0.5 * (net.output_high - net.output_low) * t
            else:
                a = z
        return a
    return forward_trace(net, x)[0]


def backward_trace(net: Network, trace, upstream: np.ndarray) -> GradientSet:
    """Gradients of sum(output * upstream) from a stored forward trace."""
    single, pre, act = trace
    upstream = np.asarray(upstream, dtype=float)
    ub = upstream[None, :] if single else upstream
    if ub.ndim != 2 or ub.shape[1] != net.output_dim or ub.shape[0] != act[0].shape[0]:
        raise ShapeError(
            f"upstream shape {upstream.shape} incompatible with output dim {net.output_dim}")

    n_layers = len(net.weights)
    gw: list = [None] * n_layers
    gb: list = [None] * n_layers

    if net.output_activation == "tanh_scaled":
        half = 0.5 * (net.output_high - net.output_low)
        t = np.tanh(pre[-1])
        delta = ub * half * (1.0 - t * t)
    else:
        delta = ub

    for i in range(n_layers - 1, -1, -1):
        gw[i] = delta.T @ act[i]
        gb[i] = delta.sum(axis=0)
        delta = delta @ net.weights[i]
        if i > 0:
            delta = delta * _hidden_grad(net, pre[i - 1], act[i])
    wrt_input = delta[0] if single else delta
    return GradientSet(gw, gb, wrt_input)


def backward(net: Network, x: np.ndarray, upstream: np.ndarray) -> GradientSet:
    """Exact reverse-mode gradients of output . upstream w.r.t. every
    parameter and w.r.t. the input."""
    _, trace = forward_trace(net, x)
    return backward_trace(net, trace, upstream)


def sgd_optimizer(learning_rate: float) -> Optimizer:
    return Optimizer("sgd", learning_rate)


def adam_optimizer(learning_rate: float, beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> Optimizer:
    return Optimizer("adam", learning_rate, beta1, beta2, eps)


def _check_congruent(net: Network, grads: GradientSet) -> None:
    if len(grads.weights) != len(net.weights) or len(grads.biases) != len(net.biases):
        raise ShapeError("gradient layer count does not match network")
    for i, (w, gw) in enumerate(zip(net.weights, grads.weights)):
        if w.shape != gw.shape or net.biases[i].shape != grads.biases[i].shape:
            raise ShapeError(f"gradient shapes at layer {i} do not match network")


def optimizer_step(net: Network, grads: GradientSet, opt: Optimizer) -> Network:
    """Apply one update in place and return the network.

    Rejects the whole update if any gradient entry is non-finite.
    """
    _check_congruent(net, grads)
    for i in range(len(net.weights)):
        if not (np.all(np.isfinite(grads.weights[i])) and np.all(np.isfinite(grads.biases[i]))):
            raise TrainingError(f"update rejected: non-finite gradient at layer {i}")

    if opt.kind == "sgd":
        for i in range(len(net.weights)):
            net.weights[i] -= opt.learning_rate * grads.weights[i]
            net.biases[i] -= opt.learning_rate * grads.biases[i]
        return net
    if opt.kind != "adam":
        raise ConfigError(f"unknown optimizer kind {opt.kind!r}")

    if not opt.m_weights:
        opt.m_weights = [np.zeros_like(w) for w in net.weights]
        opt.m_biases = [np.zeros_like(b) for b in net.biases]
        opt.v_weights = [np.zeros_like(w) for w in net.weights]
        opt.v_biases = [np.zeros_like(b) for b in net.biases]
    for i, mw in enumerate(opt.m_weights):
        if mw.shape != net.weights[i].shape:
            raise ShapeError(f"optimizer moments at layer {i} do not match network")

    opt.step_count += 1
    b1c = 1.0 - opt.beta1 ** opt.step_count
    b2c = 1.0 - opt.beta2 ** opt.step_count
    for i in range(len(net.weights)):
        for params, g, m, v in (
            (net.weights[i], grads.weights[i], opt.m_weights[i], opt.v_weights[i]),
            (net.biases[i], grads.biases[i], opt.m_biases[i], opt.v_biases[i]),
        ):
            m *= opt.beta1
            m += (1.0 - opt.beta1) * g
            v *= opt.beta2
            v += (1.0 - opt.beta2) * (g * g)
            params -= opt.learning_rate * (m / b1c) / (np.sqrt(v / b2c) + opt.eps)
    return net


def parameter_count(net: Network) -> int:
    return sum(w.size + b.size for w, b in zip(net.weights, net.biases))


def parameter_arrays(net: Network) -> list[np.ndarray]:
    """All parameters in declared order: layer 0 weights, layer 0 biases, ..."""
    out = []
    for w, b in zip(net.weights, net.biases):
        out.append(w)
        out.append(b)
    return out


def copy_network(net: Network) -> Network:
    return Network(
        list(net.layer_sizes),
        [w.copy() for w in net.weights],
        [b.copy() for b in net.biases],
        net.hidden_activation,
        net.output_activation,
        None if net.output_low is None else net.output_low.copy(),
        None if net.output_high is None else net.output_high.copy(),
    )


def check_finite(net: Network) -> bool:
    return all(np.all(np.isfinite(w)) for w in net.weights) and all(
        np.all(np.isfinite(b)) for b in net.biases)
