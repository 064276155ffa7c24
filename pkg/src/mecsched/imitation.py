"""Demonstration generation and offline pretraining of the agent ensemble."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import alloc
from .levy import DEMONSTRATION, LevyParams, levy_search
from .marl import (PrioritizedBuffer, TrainParams, Transition, agent_features, agents_vote,
                   fit_batch)
from .neural import AgentNet, loss_and_grad
from .sysmodel import ChannelState, MecSystem

DEMO_FORMAT_VERSION = 1


@dataclass
class DemoSet:
    """(channel, near-optimal placement) pairs; continuous parts are re-solved at use."""

    states: np.ndarray  # (K, N, M)
    actions: np.ndarray  # (K, N) in 0..M
    fitness: np.ndarray  # (K,) objective of each action under the allocation solver
    generator_params: LevyParams = DEMONSTRATION
    scenario_hash: str = ""

    def __len__(self):
        return self.actions.shape[0]

    def channel(self, k: int) -> ChannelState:
        return ChannelState(self.states[k])

    def subset(self, idx) -> "DemoSet":
        idx = np.asarray(idx)
        return DemoSet(self.states[idx], self.actions[idx], self.fitness[idx],
                       self.generator_params, self.scenario_hash)

    def split(self, n_train: int) -> tuple["DemoSet", "DemoSet"]:
        return self.subset(np.arange(n_train)), self.subset(np.arange(n_train, len(self)))

    def save(self, path) -> None:
        """``.npz``: ``format_version``, ``scenario_hash``, ``generator`` (JSON
        of the search parameters), ``states`` as (K, N*M) row-major with dims
        in ``dims``, ``actions`` (int64) and ``fitness``."""
        k, n, m = self.states.shape
        with open(Path(path), "wb") as fh:
            np.savez(fh, format_version=np.array(DEMO_FORMAT_VERSION),
                     scenario_hash=np.array(self.scenario_hash),
                     generator=np.array(json.dumps(asdict(self.generator_params))),
                     dims=np.array([k, n, m]), states=self.states.reshape(k, n * m),
                     actions=self.actions.astype(np.int64), fitness=self.fitness)

    @classmethod
    def load(cls, path) -> "DemoSet":
        with np.load(Path(path)) as z:
            if int(z["format_version"]) != DEMO_FORMAT_VERSION:
                raise ValueError("unsupported demonstration file version")
            k, n, m = (int(v) for v in z["dims"])
            return cls(z["states"].reshape(k, n, m).copy(), z["actions"].copy(),
                       z["fitness"].copy(), LevyParams(**json.loads(str(z["generator"]))),
                       str(z["scenario_hash"]))


def generate_demonstrations(count: int, system: MecSystem,
                            levy_params: LevyParams = DEMONSTRATION,
                            rng: np.random.Generator | None = None,
                            scenario_hash: str = "") -> DemoSet:
    """One fresh fading draw per entry, searched from the all-local start."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if rng is None:
        rng = np.random.default_rng(levy_params.rng_seed)
    cfg = system.config
    n, m = cfg.n_iotd, cfg.n_mec
    states = np.empty((count, n, m))
    actions = np.empty((count, n), dtype=np.int64)
    fitness = np.empty(count)
    start = np.zeros(n, dtype=np.int64)
    for k in range(count):
        channel = system.draw_channel(rng)
        best = levy_search(start, channel, system.tasks, cfg, levy_params, rng)
        states[k] = channel.gains
        actions[k] = best.a
        fitness[k] = alloc.assignment_cost(best.a, channel, system.tasks, cfg)[1].total
    return DemoSet(states, actions, fitness, levy_params, scenario_hash)


def demo_loss(agents: Sequence[AgentNet], demos: DemoSet, beta0: float,
              lambda1: float) -> np.ndarray:
    """Offline loss of every agent over the whole demonstration set."""
    flags = np.ones(len(demos), dtype=bool)
    out = []
    for j, net in enumerate(agents):
        x = agent_features(demos.states[:, :, j], beta0)
        y = (demos.actions == j + 1).astype(float)
        out.append(loss_and_grad(net, x, y, flags, lambda1, 0.0)[0].total)
    return np.array(out)


@dataclass
class AccuracyReport:
    ensemble: float
    per_agent: list[float]


def accuracy_report(agents: Sequence[AgentNet], demos: DemoSet, beta0: float) -> AccuracyReport:
    if len(demos) == 0:
        return AccuracyReport(float("nan"), [float("nan")] * len(agents))
    hits = 0
    per_agent = np.zeros(len(agents))
    for k in range(len(demos)):
        outs, vote = agents_vote(agents, demos.channel(k), beta0)
        hits += int(np.count_nonzero(vote == demos.actions[k]))
        for j in range(len(agents)):
            per_agent[j] += np.count_nonzero((outs[j] >= 0.5) == (demos.actions[k] == j + 1))
    total = demos.actions.size
    return AccuracyReport(hits / total, list(per_agent / total))


def accuracy(agents: Sequence[AgentNet], demos: DemoSet, beta0: float) -> float:
    """Fraction of IoTD placements where the vote reproduces the demonstration."""
    return accuracy_report(agents, demos, beta0).ensemble


@dataclass
class PretrainReport:
    step_losses: np.ndarray  # (T_D, M) batch loss of each agent at each step
    initial_demo_loss: np.ndarray  # (M,) full-set loss before training
    final_demo_loss: np.ndarray  # (M,) full-set loss after training
    train_accuracy: AccuracyReport
    extra: dict = field(default_factory=dict)


def load_demos(buffer: PrioritizedBuffer, demos: DemoSet) -> None:
    for k in range(len(demos)):
        buffer.push(Transition(demos.states[k], demos.actions[k], is_demo=True))


def pretrain(agents: Sequence[AgentNet], demos: DemoSet, buffer: PrioritizedBuffer,
             rng: np.random.Generator, t_d: int = 1000, batch_size: int = 256,
             lambda1: float = 1e-4, lr: float = 1e-3, beta0: float = 1e-3) -> PretrainReport:
    """Load ``demos`` into ``buffer`` and fit every agent on demonstration batches.

    The buffer holds only demonstrations at this point, so every batch is
    all-demo and the agent-data term of the loss is absent.
    """
    if len(demos) == 0:
        raise ValueError("no demonstrations to pretrain on")
    load_demos(buffer, demos)
    params = TrainParams(batch_size=batch_size, lambda1=lambda1, lambda2=0.0, lr=lr)
    initial = demo_loss(agents, demos, beta0, lambda1)
    history = np.empty((t_d, len(agents)))
    for step in range(t_d):
        batch = buffer.sample_batch(batch_size, rng)
        losses, rows = fit_batch(agents, batch, beta0, params)
        buffer.update_priorities(batch.ids, rows)
        history[step] = losses
    return PretrainReport(history, initial, demo_loss(agents, demos, beta0, lambda1),
                          accuracy_report(agents, demos, beta0))

