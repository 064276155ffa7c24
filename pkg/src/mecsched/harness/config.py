"""Scenario files: one flat YAML mapping of every tunable, validated on load.

Any key can also be overridden from the environment as
``MECSCHED_CFG_<KEY>`` (upper case), e.g. ``MECSCHED_CFG_N_IOTD=50``.
Values are parsed as YAML scalars.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from ..levy import LevyParams
from ..marl import TrainParams
from ..sysmodel import F_FLOOR, SystemConfig, Task

ENV_PREFIX = "MECSCHED_CFG_"

_SYSTEM_KEYS = tuple(f.name for f in fields(SystemConfig))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    # physical system
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
    noise_times_bandwidth: bool = True
    task_cycles: float = 1e9
    task_data_kb: float = 100.0
    mec_layout: str = "grid"
    # seeds; topology_seed None derives it from the master seed
    seed: int = 0
    topology_seed: int | None = None
    # schedule
    t_drl: int = 3000
    phi: int = 10
    t_d: int = 1000
    demo_quantity: int = 256
    demo_test_fraction: float = 0.25
    pretrain: bool = True
    batch_size: int = 256
    buffer_capacity: int = 1024
    # learning
    lambda1: float = 1e-4
    lambda2: float = 0.5
    lr: float = 1e-3
    tau: float = 0.6
    eps_agent: float = 0.08
    eps_demo: float = 0.02
    # search
    beta_online: float = 1.5
    beta_demo: float = 1.1
    th: float = 0.5
    g_max_online: int = 100
    g_max_demo: int = 400
    eta: float = 0.05
    sigma_variant: str = "printed"
    search_init: str = "alloc"
    # baselines / evaluation
    baseline_f_floor: float = F_FLOOR
    eval_draws: int = 100

    def __post_init__(self):
        try:
            self.system_config()
            self.levy_online()
            self.levy_demo()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for name in ("t_drl", "t_d", "seed", "g_max_online", "g_max_demo"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("phi", "demo_quantity", "batch_size", "buffer_capacity", "eval_draws"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("task_cycles", "task_data_kb", "lr", "eps_agent", "eps_demo",
                     "baseline_f_floor"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive")
        for name in ("lambda1", "lambda2", "tau"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 <= self.demo_test_fraction < 1.0:
            raise ConfigError("demo_test_fraction must lie in [0, 1)")
        if self.demo_quantity >= self.buffer_capacity:
            raise ConfigError("demo_quantity must be below buffer_capacity")
        if self.mec_layout not in ("grid", "random"):
            raise ConfigError(f"unknown mec_layout {self.mec_layout!r}")
        if self.topology_seed is not None and self.topology_seed < 0:
            raise ConfigError("topology_seed must be >= 0")

    # -- derived objects --------------------------------------------------

    def system_config(self) -> SystemConfig:
        return SystemConfig(**{k: getattr(self, k) for k in _SYSTEM_KEYS})

    def tasks(self) -> list[Task]:
        return [Task.from_kb(self.task_cycles, self.task_data_kb)] * self.n_iotd

    def levy_online(self) -> LevyParams:
        return LevyParams(beta=self.beta_online, th=self.th, g_max=self.g_max_online,
                          eta=self.eta, sigma_variant=self.sigma_variant, init=self.search_init)

    def levy_demo(self) -> LevyParams:
        return LevyParams(beta=self.beta_demo, th=self.th, g_max=self.g_max_demo,
                          eta=self.eta, sigma_variant=self.sigma_variant, init=self.search_init)

    def train_params(self) -> TrainParams:
        return TrainParams(batch_size=self.batch_size, lambda1=self.lambda1,
                           lambda2=self.lambda2, lr=self.lr)

    @property
    def demo_test_count(self) -> int:
        return int(round(self.demo_quantity * self.demo_test_fraction))

    # -- (de)serialization -----------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ScenarioSpec":
        return from_mapping({**self.to_dict(), **changes})

    def demo_hash(self) -> str:
        """Digest of every field that shapes the demonstration set."""
        keys = (*_SYSTEM_KEYS, "task_cycles", "task_data_kb", "mec_layout", "seed",
                "topology_seed", "demo_quantity", "demo_test_fraction", "beta_demo", "th",
                "g_max_demo", "eta", "sigma_variant", "search_init")
        return _digest({k: getattr(self, k) for k in keys})

    def scenario_hash(self) -> str:
        return _digest(self.to_dict())


def _digest(d: Mapping[str, Any]) -> str:
    blob = json.dumps(d, sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioSpec)}


def _coerce(key: str, value: Any) -> Any:
    kind = _FIELD_TYPES[key]
    if value is None:
        if "None" in kind:
            return None
        raise ConfigError(f"{key} must not be null")
    if kind.startswith("bool"):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true/false, got {value!r}")
        return value
    if kind.startswith("int"):
        if isinstance(value, bool) or not (isinstance(value, int) or
                                           (isinstance(value, float) and value.is_integer())):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    if kind.startswith("float"):
        if isinstance(value, bool):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be a number, got {value!r}") from None
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string, got {value!r}")
    return value


def from_mapping(data: Mapping[str, Any]) -> ScenarioSpec:
    unknown = sorted(set(data) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return ScenarioSpec(**{k: _coerce(k, v) for k, v in data.items()})


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, Any]:
    environ = os.environ if environ is None else environ
    out = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{name} does not name a config key")
        out[key] = yaml.safe_load(raw) if raw.strip() else None
    return out


def load_spec(path=None, environ: Mapping[str, str] | None = None, **overrides) -> ScenarioSpec:
    """File values, then environment overrides, then keyword overrides."""
    data: dict[str, Any] = {}
    if path is not None:
        with open(Path(path)) as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        data.update(loaded)
    data.update(env_overrides(environ))
    data.update({k: v for k, v in overrides.items() if v is not None})
    return from_mapping(data)


def dump_spec(spec: ScenarioSpec, path) -> None:
    with open(Path(path), "w") as fh:
        yaml.safe_dump(spec.to_dict(), fh, sort_keys=False)


def seed_streams(spec: ScenarioSpec) -> dict[str, np.random.Generator]:
    """Independent generators per run stage, derived from the master seed."""
    names = ("topology", "demos", "init", "channel", "train", "eval", "baseline")
    children = np.random.SeedSequence(spec.seed).spawn(len(names))
    streams = {n: np.random.default_rng(c) for n, c in zip(names, children)}
    if spec.topology_seed is not None:
        streams["topology"] = np.random.default_rng(spec.topology_seed)
    return streams
