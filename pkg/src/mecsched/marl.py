"""Multi-agent ensemble machinery: state partition, vote, prioritized replay.

Agent ``j`` (0-based here, server ``j + 1`` in decisions) only ever sees
column ``j`` of the channel matrix.  Each agent is a binary classifier
("offload to my server?"); the vote turns the M probability vectors into
one integer placement per IoTD.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import alloc
from .levy import LevyParams, levy_search
from .neural import AgentNet, adam_step, forward, loss_and_grad
from .sysmodel import ChannelState, SystemConfig, Task, reward

VOTE_THRESHOLD = 0.5
# log10(h / beta0) is about -2.8 +- 0.75 under the default geometry
FEATURE_CENTER = 2.8
FEATURE_SCALE = 0.75
BUFFER_FORMAT_VERSION = 1


class BufferSaturated(RuntimeError):
    """Every slot holds a demonstration, so nothing can be evicted."""


def partition_state(channel: ChannelState) -> list[np.ndarray]:
    """Column ``j`` of the gain matrix for each agent (copies, not views)."""
    return [channel.gains[:, j].copy() for j in range(channel.gains.shape[1])]


def agent_features(gains_col, beta0: float) -> np.ndarray:
    """Network input for one agent's gains: standardized log-gain.

    A fixed per-element transform, so no information crosses columns.
    """
    log_gain = np.log10(np.asarray(gains_col, dtype=float) / beta0)
    return (log_gain + FEATURE_CENTER) / FEATURE_SCALE


def ensemble_vote(agent_outputs) -> np.ndarray:
    """Per-IoTD argmax over agents (1-based), or 0 when no output reaches 0.5.

    Ties go to the lowest server index.
    """
    out = np.asarray(agent_outputs, dtype=float)
    if out.ndim != 2:
        raise ValueError("agent_outputs must be M vectors of length N")
    if out.shape[0] == 0:
        return np.zeros(out.shape[1], dtype=np.int64)
    best = np.argmax(out, axis=0)
    top = out[best, np.arange(out.shape[1])]
    return np.where(top >= VOTE_THRESHOLD, best + 1, 0).astype(np.int64)


def agents_vote(agents: Sequence[AgentNet], channel: ChannelState, beta0: float):
    """Each agent infers on its own column; returns (outputs (M, N), vote)."""
    outs = np.array([forward(net, agent_features(col, beta0))
                     for net, col in zip(agents, partition_state(channel))])
    if outs.size == 0:
        outs = np.zeros((0, channel.gains.shape[0]))
    return outs, ensemble_vote(outs)


@dataclass
class Transition:
    state: np.ndarray  # (N, M) gains
    target: np.ndarray  # global placement a*, entries in 0..M
    is_demo: bool = False
    priority_weight: float | None = None


@dataclass
class Batch:
    ids: np.ndarray
    states: np.ndarray  # (B, N, M)
    targets: np.ndarray  # (B, N) global placements
    is_demo: np.ndarray  # (B,)

    def __len__(self):
        return self.ids.shape[0]

    def agent_states(self, j: int, beta0: float) -> np.ndarray:
        return agent_features(self.states[:, :, j], beta0)

    def agent_targets(self, j: int) -> np.ndarray:
        """Binary targets for agent ``j`` (0-based): 1 iff a*_i == j + 1."""
        return (self.targets == j + 1).astype(float)


class PrioritizedBuffer:
    """Fixed-capacity replay with proportional prioritization.

    Demonstrations are never evicted; once full, a push overwrites the
    oldest agent-generated transition.  Sampling is with replacement with
    probability ``w_i ** tau / sum_k w_k ** tau``.
    """

    def __init__(self, capacity: int, n_iotd: int, n_mec: int, tau: float = 0.6,
                 eps_agent: float = 0.08, eps_demo: float = 0.02):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if tau < 0 or eps_agent <= 0 or eps_demo <= 0:
            raise ValueError("tau must be >= 0 and both epsilons > 0")
        self.capacity = capacity
        self.n_iotd, self.n_mec = n_iotd, n_mec
        self.tau, self.eps_agent, self.eps_demo = tau, eps_agent, eps_demo
        self.states = np.zeros((capacity, n_iotd, n_mec))
        self.targets = np.zeros((capacity, n_iotd), dtype=np.int64)
        self.is_demo = np.zeros(capacity, dtype=bool)
        self.weights = np.zeros(capacity)
        self.last_loss = np.full(capacity, np.nan)
        self.age = np.zeros(capacity, dtype=np.int64)
        self.size = 0
        self._clock = 0

    def __len__(self):
        return self.size

    @property
    def demo_count(self) -> int:
        return int(np.count_nonzero(self.is_demo[:self.size]))

    def _slot(self) -> int:
        if self.size < self.capacity:
            self.size += 1
            return self.size - 1
        agent_slots = np.flatnonzero(~self.is_demo)
        if agent_slots.size == 0:
            raise BufferSaturated("buffer is full of demonstrations")
        return int(agent_slots[np.argmin(self.age[agent_slots])])

    def push(self, transition: Transition) -> int:
        state = np.asarray(transition.state, dtype=float)
        if state.shape != (self.n_iotd, self.n_mec):
            raise ValueError(f"state shape {state.shape} != ({self.n_iotd}, {self.n_mec})")
        target = np.asarray(transition.target, dtype=np.int64)
        if np.any((target < 0) | (target > self.n_mec)):
            raise ValueError("target entries must lie in 0..M")
        w = self.weights[:self.size].max() if self.size else 1.0
        if transition.priority_weight is not None:
            w = transition.priority_weight
        floor = self.eps_demo if transition.is_demo else self.eps_agent
        slot = self._slot()
        self.states[slot] = state
        self.targets[slot] = target
        self.is_demo[slot] = transition.is_demo
        self.weights[slot] = max(w, floor)
        self.last_loss[slot] = np.nan
        self.age[slot] = self._clock
        self._clock += 1
        return slot

    def probabilities(self) -> np.ndarray:
        w = self.weights[:self.size] ** self.tau
        return w / w.sum()

    def sample_batch(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        ids = rng.choice(self.size, size=batch_size, replace=True, p=self.probabilities())
        return Batch(ids, self.states[ids], self.targets[ids], self.is_demo[ids])

    def update_priorities(self, ids, losses) -> None:
        """Set ``w = |loss - previous loss| + eps`` (first visit: raw loss).

        ``losses`` are per sampled row, already averaged over agents;
        repeated ids keep their first occurrence.
        """
        ids = np.asarray(ids)
        losses = np.asarray(losses, dtype=float)
        uniq, first = np.unique(ids, return_index=True)
        new = losses[first]
        prev = self.last_loss[uniq]
        delta = np.where(np.isnan(prev), new, new - prev)
        eps = np.where(self.is_demo[uniq], self.eps_demo, self.eps_agent)
        self.weights[uniq] = np.abs(delta) + eps
        self.last_loss[uniq] = new

    def transition(self, slot: int) -> Transition:
        return Transition(self.states[slot].copy(), self.targets[slot].copy(),
                          bool(self.is_demo[slot]), float(self.weights[slot]))

    def save(self, path) -> None:
        """``.npz`` with ``format_version``, dims, and the first ``size`` rows
        of ``states`` (flattened N*M per row), ``targets``, ``is_demo``,
        ``weights``, ``last_loss`` and ``age``."""
        n = self.size
        with open(Path(path), "wb") as fh:
            np.savez(fh, format_version=np.array(BUFFER_FORMAT_VERSION),
                     dims=np.array([self.capacity, self.n_iotd, self.n_mec, self._clock]),
                     hyper=np.array([self.tau, self.eps_agent, self.eps_demo]),
                     states=self.states[:n].reshape(n, -1), targets=self.targets[:n],
                     is_demo=self.is_demo[:n], weights=self.weights[:n],
                     last_loss=self.last_loss[:n], age=self.age[:n])

    @classmethod
    def load(cls, path) -> "PrioritizedBuffer":
        with np.load(Path(path)) as z:
            if int(z["format_version"]) != BUFFER_FORMAT_VERSION:
                raise ValueError("unsupported buffer file version")
            cap, n_iotd, n_mec, clock = (int(v) for v in z["dims"])
            tau, eps_a, eps_d = (float(v) for v in z["hyper"])
            buf = cls(cap, n_iotd, n_mec, tau, eps_a, eps_d)
            n = z["targets"].shape[0]
            buf.states[:n] = z["states"].reshape(n, n_iotd, n_mec)
            buf.targets[:n] = z["targets"]
            buf.is_demo[:n] = z["is_demo"]
            buf.weights[:n] = z["weights"]
            buf.last_loss[:n] = z["last_loss"]
            buf.age[:n] = z["age"]
            buf.size, buf._clock = n, clock
        return buf


@dataclass(frozen=True)
class TrainParams:
    batch_size: int = 256
    lambda1: float = 1e-4
    lambda2: float = 0.5
    lr: float = 1e-3


def fit_batch(agents: Sequence[AgentNet], batch: Batch, beta0: float,
              params: TrainParams, lambda2: float | None = None) -> tuple[list[float], np.ndarray]:
    """One Adam step per agent on its partitioned view of ``batch``.

    Returns per-agent total losses and per-row losses averaged over agents.
    """
    lam2 = params.lambda2 if lambda2 is None else lambda2
    losses, rows = [], np.zeros(len(batch))
    for j, net in enumerate(agents):
        report, grads = loss_and_grad(net, batch.agent_states(j, beta0), batch.agent_targets(j),
                                      batch.is_demo, params.lambda1, lam2)
        adam_step(net, grads, lr=params.lr)
        losses.append(report.total)
        rows += report.row_losses
    if agents:
        rows /= len(agents)
    return losses, rows


@dataclass
class TrainStepResult:
    losses: list[float]
    vote: np.ndarray
    target: np.ndarray
    objective: float
    reward: float
    slot: int = field(default=-1)


def train_step(agents: Sequence[AgentNet], buffer: PrioritizedBuffer, channel: ChannelState,
               tasks: Sequence[Task], config: SystemConfig, levy_params: LevyParams,
               rng: np.random.Generator, params: TrainParams = TrainParams()) -> TrainStepResult:
    """One online round: vote, refine, store, sample, update every agent."""
    _, vote = agents_vote(agents, channel, config.beta0)
    refined = levy_search(vote, channel, tasks, config, levy_params, rng)
    target = refined.a.copy()
    _, cost = alloc.assignment_cost(target, channel, tasks, config)
    slot = buffer.push(Transition(channel.gains, target, is_demo=False))
    batch = buffer.sample_batch(params.batch_size, rng)
    losses, rows = fit_batch(agents, batch, config.beta0, params)
    buffer.update_priorities(batch.ids, rows)
    return TrainStepResult(losses, vote, target, cost.total, reward(cost), slot)
