"""Continuous resource allocation for a fixed offloading vector.

Once the integer placement is fixed the per-server problem separates: each
assignee's transmit power only affects its own upload term, and the compute
term ``sum F_i / f_i`` under ``sum f_i = F_max`` has the square-root
closed form.  ``brute_force_alloc`` is a grid oracle for tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .sysmodel import (ChannelState, GlobalDecision, MecSystem, SystemConfig, Task,
                       data_rate, evaluate, local_exec_power, CostBreakdown)

GOLDEN_ITERS = 60


class OracleScale(ValueError):
    """The grid oracle only handles up to three assignees."""


@dataclass
class MecAllocation:
    f: np.ndarray
    p: np.ndarray
    cost: float


def power_objective(p, task: Task, h: float, config: SystemConfig):
    """Weighted upload time + energy of one assignee at transmit power ``p``."""
    p = np.asarray(p, dtype=float)
    return (config.phi_t + config.phi_e * p) * task.data_bits / data_rate(p, h, config)


def optimize_powers(gains, config: SystemConfig) -> np.ndarray:
    gains = np.ascontiguousarray(gains, dtype=float)
    if gains.size == 0:
        return np.empty(0)
    return kernels.golden_power(gains, kernels.pack_consts(config), GOLDEN_ITERS)


def optimize_power(task: Task, h: float, config: SystemConfig) -> float:
    # The data size scales the objective but not its argmin.
    del task
    return float(optimize_powers(np.array([h]), config)[0])


def allocate_compute(cycles: Sequence[float], budget: float) -> np.ndarray:
    cycles = np.asarray(cycles, dtype=float)
    if cycles.size == 0:
        return np.empty(0)
    root = np.sqrt(cycles)
    return budget * root / np.sum(root)


def _assignee_cost(tasks, gains, f, p, config: SystemConfig) -> float:
    if len(tasks) == 0:
        return 0.0
    bits = np.array([t.data_bits for t in tasks])
    cycles = np.array([t.cycles for t in tasks])
    t_tx = bits / data_rate(p, gains, config)
    time = t_tx + cycles / f
    energy = p * t_tx
    return float(np.sum(config.phi_t * time + config.phi_e * energy))


def solve_mec_subproblem(assignees: Sequence[tuple[Task, float]],
                         config: SystemConfig) -> MecAllocation:
    if len(assignees) == 0:
        return MecAllocation(np.empty(0), np.empty(0), 0.0)
    tasks = [t for t, _ in assignees]
    gains = np.array([h for _, h in assignees], dtype=float)
    p = optimize_powers(gains, config)
    f = allocate_compute([t.cycles for t in tasks], config.f_mec_max)
    return MecAllocation(f, p, _assignee_cost(tasks, gains, f, p, config))


def brute_force_alloc(assignees: Sequence[tuple[Task, float]], config: SystemConfig,
                      resolution: int = 100, p_step: float = 1e-4) -> MecAllocation:
    """Exhaustive grid minimizer of one server's sub-problem.

    Compute shares run over every simplex point ``k / resolution`` with
    ``k_i >= 1`` and ``sum k_i <= resolution``; each assignee's power runs
    over ``(0, P_max]`` in ``p_step`` increments.  The objective is a sum of
    per-assignee power terms plus the compute term, so the two grids are
    searched independently.
    """
    n = len(assignees)
    if n > 3:
        raise OracleScale(f"grid oracle supports at most 3 assignees, got {n}")
    if n == 0:
        return MecAllocation(np.empty(0), np.empty(0), 0.0)
    tasks = [t for t, _ in assignees]
    gains = np.array([h for _, h in assignees], dtype=float)

    p_grid = np.arange(1, int(round(config.p_iotd_max / p_step)) + 1) * p_step
    p_best = np.empty(n)
    for i, (task, h) in enumerate(assignees):
        p_best[i] = p_grid[np.argmin(power_objective(p_grid, task, h, config))]

    cycles = np.array([t.cycles for t in tasks])
    ks = np.arange(1, resolution + 1)
    if n == 1:
        shares = ks[:, None]
    elif n == 2:
        k1, k2 = np.meshgrid(ks, ks, indexing="ij")
        shares = np.stack([k1.ravel(), k2.ravel()], axis=1)
    else:
        k1, k2, k3 = np.meshgrid(ks, ks, ks, indexing="ij")
        shares = np.stack([k1.ravel(), k2.ravel(), k3.ravel()], axis=1)
    shares = shares[shares.sum(axis=1) <= resolution]
    f_grid = shares * (config.f_mec_max / resolution)
    compute = np.sum(cycles / f_grid, axis=1)
    f_best = f_grid[np.argmin(compute)].astype(float)
    return MecAllocation(f_best, p_best, _assignee_cost(tasks, gains, f_best, p_best, config))


def solve_allocation(assign, channel: ChannelState, tasks: Sequence[Task],
                     config: SystemConfig) -> GlobalDecision:
    """Continuous parts for a whole offloading vector, one server at a time.

    Each server only sees the gains of its own assignees.
    """
    assign = np.asarray(assign, dtype=np.int64)
    n = assign.shape[0]
    f = np.full(n, config.f_local)
    p = np.full(n, local_exec_power(config))
    for j in range(1, config.n_mec + 1):
        idx = np.flatnonzero(assign == j)
        if idx.size == 0:
            continue
        sol = solve_mec_subproblem([(tasks[i], channel.gains[i, j - 1]) for i in idx], config)
        f[idx] = sol.f
        p[idx] = sol.p
    return GlobalDecision(assign, f, p)


def assignment_cost(assign, channel: ChannelState, tasks: Sequence[Task],
                    config: SystemConfig) -> tuple[GlobalDecision, CostBreakdown]:
    decision = solve_allocation(assign, channel, tasks, config)
    return decision, evaluate(decision, tasks, channel, config)


def exhaustive_assignment(channel: ChannelState, tasks: Sequence[Task],
                          config: SystemConfig, max_points: int = 100_000):
    """Best offloading vector by enumerating all (M+1)^N placements."""
    n, m = config.n_iotd, config.n_mec
    if (m + 1) ** n > max_points:
        raise OracleScale(f"{(m + 1) ** n} placements exceeds {max_points}")
    best_cost, best = np.inf, None
    for code in range((m + 1) ** n):
        a = np.empty(n, dtype=np.int64)
        for i in range(n):
            code, a[i] = divmod(code, m + 1)
        _, cost = assignment_cost(a, channel, tasks, config)
        if cost.total < best_cost:
            best_cost, best = cost.total, a
    return best, best_cost


def system_cost(assign, channel: ChannelState, system: MecSystem) -> CostBreakdown:
    return assignment_cost(assign, channel, system.tasks, system.config)[1]
