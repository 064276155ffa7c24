"""Reference schedulers: random placement, nearest server, all local.

Random and nearest-server placement send excess IoTDs back to local
execution whenever a server's compute share for some assignee would fall
below ``f_floor``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .. import alloc
from ..sysmodel import (F_FLOOR, ChannelState, CostBreakdown, GlobalDecision, SystemConfig,
                        Task, Topology)


def _min_share(cycles: np.ndarray, budget: float) -> float:
    return float(alloc.allocate_compute(cycles, budget).min())


def enforce_floor(assign, tasks: Sequence[Task], config: SystemConfig, order: str = "largest",
                  rng: np.random.Generator | None = None, f_floor: float = F_FLOOR) -> np.ndarray:
    """Revert assignees to local until every server's smallest share >= ``f_floor``.

    ``order="largest"`` reverts the most demanding task first (ties: lowest
    index); ``order="random"`` reverts a uniformly chosen assignee.
    """
    a = np.asarray(assign, dtype=np.int64).copy()
    cycles = np.array([t.cycles for t in tasks], dtype=float)
    for j in range(1, config.n_mec + 1):
        idx = list(np.flatnonzero(a == j))
        while idx and _min_share(cycles[idx], config.f_mec_max) < f_floor:
            if order == "largest":
                drop = max(idx, key=lambda i: (cycles[i], -i))
            else:
                drop = idx[int(rng.integers(len(idx)))]
            idx.remove(drop)
            a[drop] = 0
    return a


def baseline_random(channel: ChannelState, tasks: Sequence[Task], config: SystemConfig,
                    rng: np.random.Generator,
                    f_floor: float = F_FLOOR) -> tuple[GlobalDecision, CostBreakdown]:
    a = rng.integers(0, config.n_mec + 1, size=config.n_iotd)
    a = enforce_floor(a, tasks, config, "random", rng, f_floor)
    return alloc.assignment_cost(a, channel, tasks, config)


def baseline_greedy(channel: ChannelState, topology: Topology, tasks: Sequence[Task],
                    config: SystemConfig,
                    f_floor: float = F_FLOOR) -> tuple[GlobalDecision, CostBreakdown]:
    """Every IoTD offloads to its nearest server (ties: lowest index)."""
    if config.n_mec == 0:
        a = np.zeros(config.n_iotd, dtype=np.int64)
    else:
        a = enforce_floor(topology.nearest_mec(), tasks, config, "largest", f_floor=f_floor)
    return alloc.assignment_cost(a, channel, tasks, config)


def baseline_local(tasks: Sequence[Task], config: SystemConfig,
                   channel: ChannelState | None = None) -> tuple[GlobalDecision, CostBreakdown]:
    """All-local execution; the channel is irrelevant and may be omitted."""
    if channel is None:
        channel = ChannelState(np.ones((config.n_iotd, config.n_mec)))
    return alloc.assignment_cost(np.zeros(config.n_iotd, dtype=np.int64), channel, tasks, config)
