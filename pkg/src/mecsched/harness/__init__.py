"""Workflow orchestration, baselines, benchmarks and scenario configuration."""

from .baselines import baseline_greedy, baseline_local, baseline_random
from .bench import BenchRow, bench_sweep
from .config import ConfigError, ScenarioSpec, load_spec
from .pipeline import RunMetrics, RunResult, infer_once, run_dirs

__all__ = ["BenchRow", "ConfigError", "RunMetrics", "RunResult", "ScenarioSpec",
           "baseline_greedy", "baseline_local", "baseline_random", "bench_sweep",
           "infer_once", "load_spec", "run_dirs"]
