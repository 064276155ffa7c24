"""Levy flight search over joint offloading/allocation vectors.

A solution stacks ``[a_1..a_N, f_1..f_N, p_1..p_N]``.  Each iteration
mutates the integer part with a channel-gated rule, takes additive heavy
tailed steps on the continuous parts, mixes mutant and target coordinate by
coordinate, repairs the candidate onto the feasible set and keeps it only if
it is strictly better.

Step lengths use Mantegna's two-Gaussian construction.  By default the
scale follows the printed form with ``2 ** ((1 + beta) / 2)`` in the
denominator; ``sigma_variant="mantegna"`` switches to the textbook
``2 ** ((beta - 1) / 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import _kernels_py, alloc, kernels
from .sysmodel import (F_FLOOR, P_MIN, ChannelState, GlobalDecision, SystemConfig, Task,
                       local_exec_power, task_arrays)

_V_FLOOR = 1e-300


@dataclass(frozen=True)
class LevyParams:
    beta: float = 1.5
    th: float = 0.5
    g_max: int = 100
    eta: float = 0.05  # step scale as a fraction of F_max / P_max
    rng_seed: int | None = None
    sigma_variant: str = "printed"
    # "alloc": start (f, p) at the allocation solver's answer for a_init;
    # "random": start from the uniform draws.
    init: str = "alloc"

    def __post_init__(self):
        if not 1.0 < self.beta < 2.0:
            raise ValueError(f"beta must lie in (1, 2), got {self.beta}")
        if not 0.0 <= self.th <= 1.0:
            raise ValueError(f"th must lie in [0, 1], got {self.th}")
        if self.g_max < 0:
            raise ValueError("g_max must be >= 0")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.sigma_variant not in ("printed", "mantegna"):
            raise ValueError(f"unknown sigma_variant {self.sigma_variant!r}")
        if self.init not in ("alloc", "random"):
            raise ValueError(f"unknown init {self.init!r}")


ONLINE = LevyParams(beta=1.5, th=0.5, g_max=100)
DEMONSTRATION = LevyParams(beta=1.1, th=0.5, g_max=400)


@dataclass
class SearchSolution:
    a: np.ndarray
    f: np.ndarray
    p: np.ndarray
    fitness: float = math.nan

    def copy(self) -> "SearchSolution":
        return SearchSolution(self.a.copy(), self.f.copy(), self.p.copy(), self.fitness)

    def to_decision(self, config: SystemConfig) -> GlobalDecision:
        """Decision form; local devices report (f_local, p_exec) rather than
        the parked search values."""
        local = self.a == 0
        f = np.where(local, config.f_local, self.f)
        p = np.where(local, local_exec_power(config), self.p)
        return GlobalDecision(self.a.copy(), f, p)


def levy_sigma(beta: float, variant: str = "printed") -> float:
    exponent = (1.0 + beta) / 2.0 if variant == "printed" else (beta - 1.0) / 2.0
    num = math.gamma(1.0 + beta) * math.sin(math.pi * beta / 2.0)
    den = math.gamma((1.0 + beta) / 2.0) * beta * 2.0 ** exponent
    return (num / den) ** (1.0 / beta)


def sample_levy_step(beta: float, rng: np.random.Generator, size=None,
                     variant: str = "printed"):
    """Heavy-tailed step ``u / |v| ** (1 / beta)``; scalar when ``size`` is None."""
    sigma = levy_sigma(beta, variant)
    u = rng.normal(0.0, sigma, size=size)
    v = rng.normal(0.0, 1.0, size=size)
    if size is None:
        while abs(v) < _V_FLOOR:
            v = rng.normal()
        return u / abs(v) ** (1.0 / beta)
    tiny = np.abs(v) < _V_FLOOR
    while np.any(tiny):
        v[tiny] = rng.normal(0.0, 1.0, size=int(np.count_nonzero(tiny)))
        tiny = np.abs(v) < _V_FLOOR
    return u / np.abs(v) ** (1.0 / beta)


def gamma_weight(g: float, g_max: float) -> float:
    return 2.0 - 2.0 * g / g_max


def _etas(params: LevyParams, config: SystemConfig) -> tuple[float, float]:
    return params.eta * config.f_mec_max, params.eta * config.p_iotd_max


def _mutation_steps(rng, params, n, m):
    d_mut = sample_levy_step(params.beta, rng, n, params.sigma_variant)
    randm = rng.integers(0, m + 1, size=n)
    d_f = sample_levy_step(params.beta, rng, n, params.sigma_variant)
    d_p = sample_levy_step(params.beta, rng, n, params.sigma_variant)
    return d_mut, randm, d_f, d_p


def h_mutation(x: SearchSolution, channel: ChannelState, gamma: float, params: LevyParams,
               rng: np.random.Generator | None = None, *, config: SystemConfig,
               steps=None) -> SearchSolution:
    """Mutant of ``x``; ``steps = (d_mut, randm, d_f, d_p)`` overrides fresh draws."""
    n, m = channel.gains.shape
    if steps is None:
        steps = _mutation_steps(rng, params, n, m)
    d_mut, randm, d_f, d_p = steps
    eta_f, eta_p = _etas(params, config)
    ratio = _kernels_py.stability_ratio(x.a, channel.gains)
    a, f, p = _kernels_py.mutate(x.a, x.f, x.p, ratio, gamma, d_mut, randm, d_f, d_p,
                                 eta_f, eta_p)
    return SearchSolution(a.astype(np.int64), f, p)


def levy_crossover(mutant: SearchSolution, target: SearchSolution, gamma: float,
                   params: LevyParams, rng: np.random.Generator | None = None, *,
                   steps=None) -> SearchSolution:
    """Candidate taking each coordinate from the mutant iff ``gamma * d > th``."""
    if steps is None:
        steps = sample_levy_step(params.beta, rng, 3 * target.a.shape[0],
                                 params.sigma_variant)
    a, f, p = _kernels_py.crossover((mutant.a, mutant.f, mutant.p),
                                    (target.a, target.f, target.p), gamma, steps, params.th)
    return SearchSolution(a.astype(np.int64), f, p)


def greedy_select(candidate: SearchSolution, target: SearchSolution,
                  fitness_fn: Callable[[SearchSolution], float]) -> SearchSolution:
    fc = candidate.fitness if not math.isnan(candidate.fitness) else fitness_fn(candidate)
    ft = target.fitness if not math.isnan(target.fitness) else fitness_fn(target)
    candidate.fitness, target.fitness = fc, ft
    return candidate if fc < ft else target


def repair(x: SearchSolution, config: SystemConfig) -> SearchSolution:
    a = np.ascontiguousarray(x.a, dtype=np.int64).copy()
    f = np.ascontiguousarray(x.f, dtype=float).copy()
    p = np.ascontiguousarray(x.p, dtype=float).copy()
    kernels.repair(a, f, p, config.n_mec, kernels.pack_consts(config))
    return SearchSolution(a, f, p)


def solution_fitness(x: SearchSolution, channel: ChannelState, tasks: Sequence[Task],
                     config: SystemConfig) -> float:
    cycles, bits = task_arrays(tasks)
    return kernels.cost_total(x.a, x.f, x.p, channel.gains, cycles, bits,
                              kernels.pack_consts(config))


@dataclass
class SearchDraws:
    """Every random number one search consumes, in consumption order."""

    f0: np.ndarray
    p0: np.ndarray
    d_mut: np.ndarray
    randm: np.ndarray
    d_f: np.ndarray
    d_p: np.ndarray
    d_cross: np.ndarray


def draw_search(rng: np.random.Generator, params: LevyParams, config: SystemConfig,
                n: int) -> SearchDraws:
    g, m = params.g_max, config.n_mec

    def levy(shape):
        return np.ascontiguousarray(sample_levy_step(params.beta, rng, shape,
                                                     params.sigma_variant))

    f0 = rng.uniform(F_FLOOR, config.f_mec_max, size=n)
    p0 = rng.uniform(P_MIN, config.p_iotd_max, size=n)
    return SearchDraws(
        f0=f0, p0=p0,
        d_mut=levy((g, n)),
        randm=np.ascontiguousarray(rng.integers(0, m + 1, size=(g, n)), dtype=np.int64),
        d_f=levy((g, n)),
        d_p=levy((g, n)),
        d_cross=levy((g, 3 * n)),
    )


def initial_solution(a_init, draws: SearchDraws, config: SystemConfig, init: str = "random",
                     channel: ChannelState | None = None,
                     tasks: Sequence[Task] | None = None) -> SearchSolution:
    """Repaired start: ``a_init`` plus the drawn or the allocation-solved (f, p).

    The random draws are consumed either way so both modes share one stream
    layout.
    """
    a = np.asarray(a_init, dtype=np.int64)
    if a.shape != draws.f0.shape:
        raise ValueError("a_init length does not match the number of IoTDs")
    if np.any((a < 0) | (a > config.n_mec)):
        raise ValueError("a_init entries must lie in 0..M")
    if init == "alloc":
        d = alloc.solve_allocation(a, channel, tasks, config)
        return repair(SearchSolution(a, d.f_alloc, d.p_alloc), config)
    return repair(SearchSolution(a, draws.f0, draws.p0), config)


def levy_search(a_init, channel: ChannelState, tasks: Sequence[Task], config: SystemConfig,
                params: LevyParams, rng: np.random.Generator | None = None, *,
                return_trace: bool = False, backend=None):
    """Refine ``a_init`` for ``params.g_max`` iterations.

    Returns the best :class:`SearchSolution` (and the per-iteration
    incumbent fitness when ``return_trace``).  ``backend`` defaults to the
    module selected by :mod:`mecsched.kernels`.
    """
    if rng is None:
        rng = np.random.default_rng(params.rng_seed)
    n = channel.gains.shape[0]
    draws = draw_search(rng, params, config, n)
    x = initial_solution(a_init, draws, config, params.init, channel, tasks)
    cycles, bits = task_arrays(tasks)
    consts = kernels.pack_consts(config)
    eta_f, eta_p = _etas(params, config)
    trace = np.empty(params.g_max)
    loop = (backend or kernels.backend).levy_loop
    fit = loop(x.a, x.f, x.p, np.ascontiguousarray(channel.gains), cycles, bits,
               draws.d_mut, draws.randm, draws.d_f, draws.d_p, draws.d_cross,
               float(params.th), eta_f, eta_p, consts, trace)
    x.fitness = float(fit)
    if return_trace:
        return x, trace
    return x


def levy_search_composed(a_init, channel: ChannelState, tasks: Sequence[Task],
                         config: SystemConfig, params: LevyParams,
                         rng: np.random.Generator | None = None) -> SearchSolution:
    """Operator-by-operator version of :func:`levy_search` (slow; for checking).

    Consumes the same draws in the same order, so for equal seeds it
    reproduces the fused kernels.
    """
    if rng is None:
        rng = np.random.default_rng(params.rng_seed)
    n = channel.gains.shape[0]
    draws = draw_search(rng, params, config, n)

    def fitness(s):
        return solution_fitness(s, channel, tasks, config)

    target = initial_solution(a_init, draws, config, params.init, channel, tasks)
    target.fitness = fitness(target)
    for g in range(params.g_max):
        gamma = gamma_weight(g, params.g_max)
        mutant = h_mutation(target, channel, gamma, params, config=config,
                            steps=(draws.d_mut[g], draws.randm[g], draws.d_f[g], draws.d_p[g]))
        candidate = repair(levy_crossover(mutant, target, gamma, params,
                                          steps=draws.d_cross[g]), config)
        target = greedy_select(candidate, target, fitness)
    return replace(target)
