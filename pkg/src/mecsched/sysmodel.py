"""Physical model of a multi-server MEC system.

Channel gains, uplink rates, local/remote latency and energy, and the
weighted objective that every scheduler in this package minimizes.

Offloading decisions use the integer encoding ``assign[i] in {0, ..., M}``
where ``0`` is local execution and ``j >= 1`` is MEC server ``j``.  Channel
matrices are indexed ``gains[i, j - 1]`` for server ``j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Search/repair bounds shared by alloc, levy and the kernels.
P_MIN = 1e-6
F_FLOOR = 1e6


class InfeasibleDecision(ValueError):
    """Raised when a decision violates the compute or power budgets."""


@dataclass(frozen=True)
class SystemConfig:
    n_iotd: int = 30
    n_mec: int = 2
    bandwidth: float = 1e6
    noise_density: float = 1e-12
    beta0: float = 1e-3
    f_local: float = 1e9
    kappa: float = 1e-27
    v_exp: float = 3.0
    f_mec_max: float = 50e9
    p_iotd_max: float = 1.5
    phi_t: float = 0.5
    phi_e: float = 0.5
    area_side: float = 50.0
    min_distance: float = 1.0
    # True: noise power = noise_density * bandwidth; False: noise_density used as-is.
    noise_times_bandwidth: bool = True

    def __post_init__(self):
        if self.n_iotd < 0 or self.n_mec < 0:
            raise ValueError("n_iotd and n_mec must be non-negative")
        for name in ("bandwidth", "noise_density", "beta0", "f_local",
                     "f_mec_max", "p_iotd_max", "area_side", "min_distance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if self.v_exp < 1:
            raise ValueError("v_exp must be >= 1")
        if self.phi_t < 0 or self.phi_e < 0 or self.phi_t + self.phi_e <= 0:
            raise ValueError("phi_t, phi_e must be non-negative with a positive sum")

    @property
    def noise_power(self) -> float:
        if self.noise_times_bandwidth:
            return self.noise_density * self.bandwidth
        return self.noise_density


@dataclass(frozen=True)
class Task:
    cycles: float
    data_bits: float

    def __post_init__(self):
        if not (self.cycles > 0 and self.data_bits > 0):
            raise ValueError("task cycles and data size must be positive")

    @classmethod
    def from_kb(cls, cycles: float, data_kb: float) -> "Task":
        return cls(cycles, data_kb * 8e3)


def task_arrays(tasks: Sequence[Task]) -> tuple[np.ndarray, np.ndarray]:
    cycles = np.array([t.cycles for t in tasks], dtype=float)
    bits = np.array([t.data_bits for t in tasks], dtype=float)
    return cycles, bits


@dataclass
class Topology:
    iotd_pos: np.ndarray  # (N, 2) metres
    mec_pos: np.ndarray  # (M, 2) metres
    fading: np.ndarray  # (N, M), strictly positive

    def __post_init__(self):
        self.iotd_pos = np.asarray(self.iotd_pos, dtype=float).reshape(-1, 2)
        self.mec_pos = np.asarray(self.mec_pos, dtype=float).reshape(-1, 2)
        self.fading = np.asarray(self.fading, dtype=float).reshape(
            len(self.iotd_pos), len(self.mec_pos))
        if np.any(self.fading <= 0):
            raise ValueError("fading factors must be strictly positive")

    def squared_distances(self) -> np.ndarray:
        diff = self.iotd_pos[:, None, :] - self.mec_pos[None, :, :]
        return np.sum(diff * diff, axis=-1)

    def nearest_mec(self) -> np.ndarray:
        """1-based index of the closest server per IoTD (lowest index on ties)."""
        if len(self.mec_pos) == 0:
            return np.zeros(len(self.iotd_pos), dtype=np.int64)
        return np.argmin(self.squared_distances(), axis=1).astype(np.int64) + 1

    def redraw_fading(self, rng: np.random.Generator) -> "Topology":
        """Same positions, fresh unit-mean exponential (Rayleigh power) fading."""
        fading = draw_fading(rng, len(self.iotd_pos), len(self.mec_pos))
        return Topology(self.iotd_pos, self.mec_pos, fading)


def draw_fading(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    fading = rng.exponential(1.0, size=(n, m))
    # exponential() can return exactly 0.0 with negligible probability
    return np.maximum(fading, np.finfo(float).tiny)


def grid_mec_positions(n_mec: int, side: float) -> np.ndarray:
    """Servers at the cell centers of a rows x cols grid over the square."""
    if n_mec == 0:
        return np.zeros((0, 2))
    rows = int(math.floor(math.sqrt(n_mec)))
    cols = int(math.ceil(n_mec / rows))
    k = np.arange(n_mec)
    x = (k % cols + 0.5) * side / cols
    y = (k // cols + 0.5) * side / rows
    return np.stack([x, y], axis=1)


def random_topology(config: SystemConfig, rng: np.random.Generator,
                    mec_layout: str = "grid") -> Topology:
    """Uniform IoTD positions; servers on a grid (default) or uniform too."""
    side = config.area_side
    iotd = rng.uniform(0.0, side, size=(config.n_iotd, 2))
    if mec_layout == "grid":
        mec = grid_mec_positions(config.n_mec, side)
    elif mec_layout == "random":
        mec = rng.uniform(0.0, side, size=(config.n_mec, 2))
    else:
        raise ValueError(f"unknown mec_layout {mec_layout!r}")
    return Topology(iotd, mec, draw_fading(rng, config.n_iotd, config.n_mec))


@dataclass
class ChannelState:
    gains: np.ndarray  # (N, M)

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=float)
        if self.gains.ndim != 2:
            raise ValueError("channel gains must be an N x M matrix")
        if not np.all(np.isfinite(self.gains)) or np.any(self.gains <= 0):
            raise ValueError("channel gains must be finite and positive")

    @property
    def n_iotd(self) -> int:
        return self.gains.shape[0]

    @property
    def n_mec(self) -> int:
        return self.gains.shape[1]


def compute_channel(topology: Topology, config: SystemConfig) -> ChannelState:
    if topology.fading.shape != (config.n_iotd, config.n_mec):
        raise ValueError(
            f"topology is {topology.fading.shape}, config expects "
            f"({config.n_iotd}, {config.n_mec})")
    d2 = np.maximum(topology.squared_distances(), config.min_distance ** 2)
    return ChannelState(config.beta0 * topology.fading / d2)


def data_rate(p, h, config: SystemConfig):
    """Uplink rate in bits/s; zero power gives zero rate."""
    return config.bandwidth * np.log2(1.0 + np.asarray(p) * np.asarray(h) / config.noise_power)


def local_exec_power(config: SystemConfig) -> float:
    return config.kappa * config.f_local ** config.v_exp


@dataclass
class GlobalDecision:
    assign: np.ndarray
    f_alloc: np.ndarray
    p_alloc: np.ndarray

    def __post_init__(self):
        self.assign = np.asarray(self.assign, dtype=np.int64)
        self.f_alloc = np.asarray(self.f_alloc, dtype=float)
        self.p_alloc = np.asarray(self.p_alloc, dtype=float)
        if not (self.assign.shape == self.f_alloc.shape == self.p_alloc.shape):
            raise ValueError("assign, f_alloc and p_alloc must have equal length")

    @classmethod
    def all_local(cls, config: SystemConfig) -> "GlobalDecision":
        n = config.n_iotd
        return cls(np.zeros(n, dtype=np.int64), np.full(n, config.f_local),
                   np.full(n, local_exec_power(config)))


@dataclass
class CostBreakdown:
    per_device_time: np.ndarray
    per_device_energy: np.ndarray
    per_device_cost: np.ndarray
    total: float

    @property
    def avg_time(self) -> float:
        return float(np.mean(self.per_device_time)) if self.per_device_time.size else 0.0

    @property
    def avg_energy(self) -> float:
        return float(np.mean(self.per_device_energy)) if self.per_device_energy.size else 0.0


@dataclass(frozen=True)
class Violation:
    constraint: str  # "placement", "compute" or "power"
    index: int  # IoTD index, or 1-based MEC index for compute violations
    detail: str = field(default="", compare=False)


def check_feasibility(decision: GlobalDecision, config: SystemConfig) -> list[Violation]:
    out: list[Violation] = []
    a, f, p = decision.assign, decision.f_alloc, decision.p_alloc
    for i in np.flatnonzero((a < 0) | (a > config.n_mec)):
        out.append(Violation("placement", int(i), f"assign={a[i]} outside 0..{config.n_mec}"))
    budget = config.f_mec_max * (1 + 1e-9)
    for j in range(1, config.n_mec + 1):
        load = float(np.sum(f[a == j]))
        if load > budget:
            out.append(Violation("compute", j, f"sum f={load:.6g} > {config.f_mec_max:.6g}"))
    off = a > 0
    bad_p = off & ((p <= 0) | (p > config.p_iotd_max * (1 + 1e-12)))
    for i in np.flatnonzero(bad_p):
        out.append(Violation("power", int(i), f"p={p[i]:.6g} outside (0, {config.p_iotd_max}]"))
    for i in np.flatnonzero(off & (f <= 0)):
        out.append(Violation("compute", int(i), f"offloader {i} has f={f[i]:.6g}"))
    p_exec = local_exec_power(config)
    if p_exec > config.p_iotd_max:
        for i in np.flatnonzero(a == 0):
            out.append(Violation("power", int(i), f"local power {p_exec:.6g} > P_max"))
    return out


def device_costs(assign, f, p, gains, cycles, bits, config: SystemConfig):
    """Per-device (time, energy, weighted cost) arrays for a validated decision."""
    assign = np.asarray(assign)
    n = assign.shape[0]
    time = np.empty(n)
    energy = np.empty(n)
    local = assign == 0
    t_loc = cycles[local] / config.f_local
    time[local] = t_loc
    energy[local] = t_loc * local_exec_power(config)
    off = ~local
    if np.any(off):
        idx = np.flatnonzero(off)
        h = gains[idx, assign[idx] - 1]
        rate = data_rate(p[idx], h, config)
        t_tx = bits[idx] / rate
        time[idx] = t_tx + cycles[idx] / f[idx]
        energy[idx] = p[idx] * t_tx
    cost = config.phi_t * time + config.phi_e * energy
    return time, energy, cost


def evaluate(decision: GlobalDecision, tasks: Sequence[Task], channel: ChannelState,
             config: SystemConfig) -> CostBreakdown:
    n = decision.assign.shape[0]
    if len(tasks) != n or channel.gains.shape != (n, config.n_mec):
        raise ValueError("decision, tasks and channel dimensions disagree")
    violations = check_feasibility(decision, config)
    if violations:
        raise InfeasibleDecision("; ".join(v.detail for v in violations))
    cycles, bits = task_arrays(tasks)
    time, energy, cost = device_costs(decision.assign, decision.f_alloc, decision.p_alloc,
                                      channel.gains, cycles, bits, config)
    return CostBreakdown(time, energy, cost, float(np.sum(cost)))


def reward(cost: CostBreakdown) -> float:
    if not cost.total > 0:
        raise ValueError("reward is undefined for non-positive total cost")
    return 1.0 / cost.total


@dataclass
class MecSystem:
    """A fixed deployment: config, device/server positions and per-device tasks."""

    config: SystemConfig
    topology: Topology
    tasks: list[Task]

    def draw_channel(self, rng: np.random.Generator) -> ChannelState:
        return compute_channel(self.topology.redraw_fading(rng), self.config)
