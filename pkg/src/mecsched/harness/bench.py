"""Paired comparison of the trained scheduler against the baselines."""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .baselines import baseline_greedy, baseline_local, baseline_random
from .config import ScenarioSpec
from .pipeline import RunResult, infer_once, run_dirs

METHODS = ("dirs", "greedy", "random", "local")


@dataclass
class BenchRow:
    n_iotd: int
    n_mec: int
    method: str
    mean_objective: float
    mean_time_s: float
    mean_energy_j: float
    std_objective: float
    draws: int


def evaluate_methods(result: RunResult, draws: int) -> dict[str, np.ndarray]:
    """Per-draw (objective, avg time, avg energy) of every method on shared channels."""
    system, agents = result.system, result.agents
    cfg, tasks = system.config, system.tasks
    chan_rng, base_rng = result.streams["eval"], result.streams["baseline"]
    floor = result.spec.baseline_f_floor
    out = {k: np.empty((draws, 3)) for k in METHODS}
    for d in range(draws):
        channel = system.draw_channel(chan_rng)
        costs = {
            "dirs": infer_once(agents, channel, tasks, cfg)[1],
            "greedy": baseline_greedy(channel, system.topology, tasks, cfg, floor)[1],
            "random": baseline_random(channel, tasks, cfg, base_rng, floor)[1],
            "local": baseline_local(tasks, cfg, channel)[1],
        }
        for k, c in costs.items():
            out[k][d] = (c.total, c.avg_time, c.avg_energy)
    return out


def bench_sweep(spec: ScenarioSpec, points: Iterable[tuple[int, int]], draws: int | None = None,
                progress: Callable[[str], None] | None = None) -> list[BenchRow]:
    """Train at every ``(n_iotd, n_mec)`` point, then score all methods."""
    draws = spec.eval_draws if draws is None else draws
    rows = []
    for n, m in points:
        if progress:
            progress(f"training N={n} M={m}")
        result = run_dirs(spec.replace(n_iotd=n, n_mec=m))
        per = evaluate_methods(result, draws)
        for k in METHODS:
            v = per[k]
            rows.append(BenchRow(n, m, k, float(v[:, 0].mean()), float(v[:, 1].mean()),
                                 float(v[:, 2].mean()), float(v[:, 0].std()), draws))
    return rows


def write_bench_csv(rows: list[BenchRow], path) -> None:
    lines = [",".join(f.name for f in fields(BenchRow))]
    for r in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in astuple(r)))
    Path(path).write_text("\n".join(lines) + "\n")
