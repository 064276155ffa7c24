"""End-to-end workflow: pretraining, then the online slot loop.

Each slot redraws small-scale fading, lets every agent infer on its own
channel column, votes, solves the per-server allocation and records the
cost.  Every ``phi``-th slot (slots ``phi - 1, 2 phi - 1, ...``) also runs
one centralized training step.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import alloc
from ..imitation import DemoSet, PretrainReport, generate_demonstrations, pretrain
from ..marl import PrioritizedBuffer, agents_vote, train_step
from ..neural import AgentNet
from ..sysmodel import (ChannelState, CostBreakdown, GlobalDecision, MecSystem, SystemConfig,
                        Task, check_feasibility, random_topology, reward)
from .config import ScenarioSpec, seed_streams

METRIC_COLUMNS = ("slot", "objective", "reward", "avg_time_s", "avg_energy_j")


def infer_once(agents: Sequence[AgentNet], channel: ChannelState, tasks: Sequence[Task],
               config: SystemConfig) -> tuple[GlobalDecision, CostBreakdown]:
    """Decentralized decision: local inference, vote, per-server allocation."""
    _, vote = agents_vote(agents, channel, config.beta0)
    return alloc.assignment_cost(vote, channel, tasks, config)


@dataclass
class RunMetrics:
    objective: np.ndarray
    reward: np.ndarray
    avg_time: np.ndarray
    avg_energy: np.ndarray
    losses: np.ndarray  # (T, M) most recent online training loss at each slot
    train_slots: np.ndarray
    train_losses: np.ndarray  # (S, M)
    pretrain_losses: np.ndarray  # (T_D, M)
    timings: dict = field(default_factory=dict)

    @property
    def n_slots(self) -> int:
        return self.objective.shape[0]

    def loss_history(self) -> np.ndarray:
        """Every recorded loss per agent: pretraining steps, then online steps."""
        return np.concatenate([self.pretrain_losses, self.train_losses], axis=0)

    def write_csv(self, path) -> None:
        """One row per slot; floats in shortest round-trip form."""
        m = self.losses.shape[1]
        header = list(METRIC_COLUMNS) + [f"loss_agent{j + 1}" for j in range(m)]
        lines = [",".join(header)]
        for t in range(self.n_slots):
            vals = [self.objective[t], self.reward[t], self.avg_time[t], self.avg_energy[t],
                    *self.losses[t]]
            lines.append(",".join([str(t)] + [repr(float(v)) for v in vals]))
        Path(path).write_text("\n".join(lines) + "\n")

    def write_pretrain_csv(self, path) -> None:
        m = self.pretrain_losses.shape[1] if self.pretrain_losses.ndim == 2 else 0
        lines = [",".join(["step"] + [f"loss_agent{j + 1}" for j in range(m)])]
        for k, row in enumerate(self.pretrain_losses):
            lines.append(",".join([str(k)] + [repr(float(v)) for v in row]))
        Path(path).write_text("\n".join(lines) + "\n")

    def write_timings(self, path) -> None:
        Path(path).write_text(json.dumps(self.timings, indent=2, sort_keys=True) + "\n")


@dataclass
class RunResult:
    spec: ScenarioSpec
    system: MecSystem
    agents: list[AgentNet]
    buffer: PrioritizedBuffer
    metrics: RunMetrics
    demos: DemoSet | None = None
    test_demos: DemoSet | None = None
    pretrain_report: PretrainReport | None = None
    streams: dict = field(default_factory=dict)


def build_system(spec: ScenarioSpec, rng: np.random.Generator) -> MecSystem:
    config = spec.system_config()
    return MecSystem(config, random_topology(config, rng, spec.mec_layout), spec.tasks())


def make_demos(spec: ScenarioSpec, system: MecSystem, rng: np.random.Generator) -> DemoSet:
    """Training demos plus the held-out extra, in one set (train first)."""
    return generate_demonstrations(spec.demo_quantity + spec.demo_test_count, system,
                                   spec.levy_demo(), rng, spec.demo_hash())


def run_dirs(spec: ScenarioSpec, demos: DemoSet | None = None) -> RunResult:
    """Run the full workflow for ``spec``; ``demos`` skips generation when given."""
    streams = seed_streams(spec)
    timings: dict[str, float] = {}
    system = build_system(spec, streams["topology"])
    cfg, tasks = system.config, system.tasks
    m = cfg.n_mec

    agents = [AgentNet.create(cfg.n_iotd, streams["init"]) for _ in range(m)]
    buffer = PrioritizedBuffer(spec.buffer_capacity, cfg.n_iotd, m, spec.tau,
                               spec.eps_agent, spec.eps_demo)

    train_set = test_set = report = None
    pre_losses = np.zeros((0, m))
    if spec.pretrain:
        t0 = time.perf_counter()
        if demos is None:
            demos = make_demos(spec, system, streams["demos"])
        elif demos.scenario_hash and demos.scenario_hash != spec.demo_hash():
            raise ValueError("demonstration file was generated for a different scenario")
        timings["demo_generation_s"] = time.perf_counter() - t0
        train_set, test_set = demos.split(min(spec.demo_quantity, len(demos)))
        t0 = time.perf_counter()
        report = pretrain(agents, train_set, buffer, streams["train"], spec.t_d,
                          spec.batch_size, spec.lambda1, spec.lr, cfg.beta0)
        timings["pretrain_s"] = time.perf_counter() - t0
        pre_losses = report.step_losses

    levy_params = spec.levy_online()
    train_params = spec.train_params()
    T = spec.t_drl
    objective, rew = np.empty(T), np.empty(T)
    avg_t, avg_e = np.empty(T), np.empty(T)
    losses = np.empty((T, m))
    current = pre_losses[-1].copy() if len(pre_losses) else np.full(m, np.nan)
    train_slots, train_losses = [], []

    t0 = time.perf_counter()
    for t in range(T):
        channel = system.draw_channel(streams["channel"])
        decision, cost = infer_once(agents, channel, tasks, cfg)
        if check_feasibility(decision, cfg):
            raise RuntimeError(f"slot {t}: inferred decision is infeasible")
        objective[t], rew[t] = cost.total, reward(cost)
        avg_t[t], avg_e[t] = cost.avg_time, cost.avg_energy
        if (t + 1) % spec.phi == 0:
            res = train_step(agents, buffer, channel, tasks, cfg, levy_params,
                             streams["train"], train_params)
            current = np.asarray(res.losses, dtype=float)
            train_slots.append(t)
            train_losses.append(current)
        losses[t] = current
    timings["online_s"] = time.perf_counter() - t0

    metrics = RunMetrics(objective, rew, avg_t, avg_e, losses,
                         np.array(train_slots, dtype=np.int64),
                         np.array(train_losses).reshape(-1, m), pre_losses, timings)
    return RunResult(spec, system, agents, buffer, metrics, train_set, test_set, report, streams)


def slots_to_reach(rewards, fraction: float = 0.9, final_window: int = 500,
                   smooth: int = 100) -> int:
    """First slot whose trailing mean reward reaches ``fraction`` of the
    final-window mean; ``len(rewards)`` if it never does."""
    r = np.asarray(rewards, dtype=float)
    if r.size == 0:
        return 0
    target = fraction * r[-final_window:].mean()
    csum = np.concatenate([[0.0], np.cumsum(r)])
    idx = np.arange(r.size)
    lo = np.maximum(idx + 1 - smooth, 0)
    trailing = (csum[idx + 1] - csum[lo]) / (idx + 1 - lo)
    hit = np.flatnonzero(trailing >= target)
    return int(hit[0]) if hit.size else int(r.size)
