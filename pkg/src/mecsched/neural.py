"""Per-agent policy network with hand-written backprop and Adam.

Fully connected rectifier layers with a sigmoid output, one unit per IoTD.
The training loss mixes demonstration rows and agent-generated rows::

    L = L_D + lambda1 * ||theta||^2 + lambda2 * L_A

where ``L_D`` / ``L_A`` are the mean (over rows and outputs) clipped binary
cross-entropies of the demonstration / agent rows of a batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HIDDEN = (30, 80, 60)
PROB_CLIP = 1e-7
FORMAT_VERSION = 1


class DimensionMismatch(ValueError):
    pass


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0


@dataclass
class AgentNet:
    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]  # weights[k] has shape (dims[k], dims[k+1])
    biases: list[np.ndarray]
    adam: AdamState = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if self.adam is None:
            self.adam = AdamState([np.zeros_like(p) for p in self.params()],
                                  [np.zeros_like(p) for p in self.params()])

    @classmethod
    def create(cls, n_inputs: int, rng: np.random.Generator, hidden=HIDDEN,
               n_outputs: int | None = None) -> "AgentNet":
        dims = (n_inputs, *hidden, n_inputs if n_outputs is None else n_outputs)
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(dims, weights, biases)

    @classmethod
    def zeros(cls, dims) -> "AgentNet":
        dims = tuple(dims)
        return cls(dims, [np.zeros((a, b)) for a, b in zip(dims[:-1], dims[1:])],
                   [np.zeros(b) for b in dims[1:]])

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "AgentNet":
        net = AgentNet(self.layer_dims, [w.copy() for w in self.weights],
                       [b.copy() for b in self.biases])
        net.adam = AdamState([m.copy() for m in self.adam.m],
                             [v.copy() for v in self.adam.v], self.adam.t)
        return net

    @property
    def n_inputs(self) -> int:
        return self.layer_dims[0]


def _sigmoid(z):
    # split form avoids overflow in exp for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_cache(net: AgentNet, x: np.ndarray):
    acts = [x]
    pre = []
    h = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pre.append(z)
        h = _sigmoid(z) if k == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts, pre


def forward(net: AgentNet, state) -> np.ndarray:
    """Offload probabilities for one state (1-D) or a batch of states (2-D)."""
    x = np.asarray(state, dtype=float)
    if x.shape[-1] != net.n_inputs:
        raise DimensionMismatch(f"expected {net.n_inputs} inputs, got {x.shape[-1]}")
    acts, _ = _forward_cache(net, np.atleast_2d(x))
    return acts[-1][0] if x.ndim == 1 else acts[-1]


def predict_action(net: AgentNet, state) -> tuple[np.ndarray, np.ndarray]:
    """(raw probabilities, thresholded 0/1 action with ties at 0.5 -> 1)."""
    probs = forward(net, state)
    return probs, (probs >= 0.5).astype(np.int64)


@dataclass
class LossReport:
    total: float
    demo: float
    agent: float
    l2: float
    row_losses: np.ndarray  # per-row mean cross-entropy


def loss_and_grad(net: AgentNet, states, targets, is_demo, lambda1: float,
                  lambda2: float) -> tuple[LossReport, list[np.ndarray]]:
    """Composite loss and its exact gradient (ordered like ``net.params()``)."""
    x = np.atleast_2d(np.asarray(states, dtype=float))
    y = np.atleast_2d(np.asarray(targets, dtype=float))
    demo = np.asarray(is_demo, dtype=bool).reshape(-1)
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    acts, pre = _forward_cache(net, x)
    prob = acts[-1]
    clipped = np.clip(prob, PROB_CLIP, 1.0 - PROB_CLIP)
    ce = -(y * np.log(clipped) + (1.0 - y) * np.log(1.0 - clipped))
    n_out = y.shape[1]
    row = ce.mean(axis=1)
    k = int(np.count_nonzero(demo))
    s = demo.size - k
    l_demo = float(row[demo].mean()) if k else 0.0
    l_agent = float(row[~demo].mean()) if s else 0.0
    l2 = float(sum(np.sum(p * p) for p in net.params()))
    total = l_demo + lambda1 * l2 + lambda2 * l_agent

    row_weight = np.where(demo, 1.0 / max(k, 1), lambda2 / max(s, 1))
    # d(ce)/dz = prob - y inside the clip band, 0 where the clip is active
    inside = (prob > PROB_CLIP) & (prob < 1.0 - PROB_CLIP)
    delta = (prob - y) * inside * (row_weight[:, None] / n_out)

    grads: list[np.ndarray] = [None] * (2 * len(net.weights))  # type: ignore[list-item]
    for layer in range(len(net.weights) - 1, -1, -1):
        w = net.weights[layer]
        grads[2 * layer] = acts[layer].T @ delta + 2.0 * lambda1 * w
        grads[2 * layer + 1] = delta.sum(axis=0) + 2.0 * lambda1 * net.biases[layer]
        if layer:
            delta = (delta @ w.T) * (pre[layer - 1] > 0)
    return LossReport(total, l_demo, l_agent, l2, row), grads


def adam_step(net: AgentNet, grads, lr: float = 1e-3, betas=(0.9, 0.999),
              eps: float = 1e-8) -> AgentNet:
    """In-place Adam update with bias correction; returns ``net``."""
    b1, b2 = betas
    st = net.adam
    st.t += 1
    c1 = 1.0 - b1 ** st.t
    c2 = 1.0 - b2 ** st.t
    for p, g, m, v in zip(net.params(), grads, st.m, st.v):
        if g.shape != p.shape:
            raise DimensionMismatch(f"gradient shape {g.shape} != parameter {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return net


def save_nets(path, nets: list[AgentNet]) -> None:
    """Write agents to an ``.npz`` container.

    Keys: ``format_version``, ``n_agents``, then per agent ``j``:
    ``agent{j}/layer_dims`` (int64) and ``agent{j}/param{k}`` (float64, in
    ``params()`` order: W0, b0, W1, b1, ...).  Adam moments go under
    ``agent{j}/adam_m{k}``, ``agent{j}/adam_v{k}``, ``agent{j}/adam_t``.
    """
    data = {"format_version": np.array(FORMAT_VERSION), "n_agents": np.array(len(nets))}
    for j, net in enumerate(nets):
        data[f"agent{j}/layer_dims"] = np.array(net.layer_dims, dtype=np.int64)
        for k, p in enumerate(net.params()):
            data[f"agent{j}/param{k}"] = p
            data[f"agent{j}/adam_m{k}"] = net.adam.m[k]
            data[f"agent{j}/adam_v{k}"] = net.adam.v[k]
        data[f"agent{j}/adam_t"] = np.array(net.adam.t)
    with open(Path(path), "wb") as fh:
        np.savez(fh, **data)


def load_nets(path) -> list[AgentNet]:
    with np.load(Path(path)) as z:
        version = int(z["format_version"])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported agent file version {version}")
        nets = []
        for j in range(int(z["n_agents"])):
            dims = tuple(int(d) for d in z[f"agent{j}/layer_dims"])
            n_layers = len(dims) - 1
            params = [z[f"agent{j}/param{k}"].copy() for k in range(2 * n_layers)]
            net = AgentNet(dims, params[0::2], params[1::2])
            net.adam = AdamState([z[f"agent{j}/adam_m{k}"].copy() for k in range(2 * n_layers)],
                                 [z[f"agent{j}/adam_v{k}"].copy() for k in range(2 * n_layers)],
                                 int(z[f"agent{j}/adam_t"]))
            nets.append(net)
    return nets
