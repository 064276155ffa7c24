"""Command line entry point: ``mecsched {demo-gen,train,infer,bench}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import kernels
from .harness.bench import bench_sweep, write_bench_csv
from .harness.config import ConfigError, dump_spec, load_spec, seed_streams
from .harness.pipeline import build_system, infer_once, make_demos, run_dirs
from .imitation import DemoSet
from .neural import load_nets, save_nets

log = logging.getLogger("mecsched")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="scenario YAML file")
    p.add_argument("--seed", type=int, help="master seed (overrides the file)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mecsched", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo-gen", help="generate a demonstration set")
    _common(p)

    p = sub.add_parser("train", help="pretrain and run the online loop")
    _common(p)
    p.add_argument("--demos", type=Path, help="demonstration file from demo-gen")

    p = sub.add_parser("infer", help="one decentralized decision on a fresh channel draw")
    _common(p)
    p.add_argument("--weights", type=Path, required=True, help="agents.npz from train")

    p = sub.add_parser("bench", help="sweep N / M and compare against baselines")
    _common(p)
    p.add_argument("--n-iotd", type=_int_list, default=[10, 30, 50])
    p.add_argument("--n-mec", type=_int_list, default=[2])
    p.add_argument("--draws", type=int, help="channel draws per point")
    return parser


def cmd_demo_gen(spec, args) -> int:
    streams = seed_streams(spec)
    system = build_system(spec, streams["topology"])
    demos = make_demos(spec, system, streams["demos"])
    path = args.out / "demos.npz"
    demos.save(path)
    print(f"wrote {len(demos)} demonstrations to {path} "
          f"(mean objective {demos.fitness.mean():.4f})")
    return 0


def cmd_train(spec, args) -> int:
    demos = DemoSet.load(args.demos) if args.demos else None
    result = run_dirs(spec, demos)
    out = args.out
    save_nets(out / "agents.npz", result.agents)
    result.buffer.save(out / "buffer.npz")
    result.metrics.write_csv(out / "metrics.csv")
    result.metrics.write_pretrain_csv(out / "pretrain.csv")
    result.metrics.write_timings(out / "timings.json")
    dump_spec(spec, out / "scenario.yaml")
    m = result.metrics
    if result.pretrain_report is not None:
        print(f"pretrain accuracy {result.pretrain_report.train_accuracy.ensemble:.4f}")
    if m.n_slots:
        k = min(100, m.n_slots)
        print(f"slots {m.n_slots}: mean objective first {k} {m.objective[:k].mean():.4f}, "
              f"last {k} {m.objective[-k:].mean():.4f}")
    print(f"wrote results to {out}")
    return 0


def cmd_infer(spec, args) -> int:
    agents = load_nets(args.weights)
    streams = seed_streams(spec)
    system = build_system(spec, streams["topology"])
    cfg = system.config
    if len(agents) != cfg.n_mec or any(a.n_inputs != cfg.n_iotd for a in agents):
        raise ConfigError("weights do not match the scenario's n_iotd / n_mec")
    channel = system.draw_channel(streams["eval"])
    decision, cost = infer_once(agents, channel, system.tasks, cfg)
    print(f"{'iotd':>4} {'server':>6} {'f (Gcyc/s)':>11} {'p (W)':>8} {'time (s)':>9} "
          f"{'energy (J)':>10} {'cost':>8}")
    for i in range(cfg.n_iotd):
        print(f"{i:>4} {decision.assign[i]:>6} {decision.f_alloc[i] / 1e9:>11.4f} "
              f"{decision.p_alloc[i]:>8.4f} {cost.per_device_time[i]:>9.4f} "
              f"{cost.per_device_energy[i]:>10.4f} {cost.per_device_cost[i]:>8.4f}")
    print(f"total {cost.total:.6f}  avg time {cost.avg_time:.6f} s  "
          f"avg energy {cost.avg_energy:.6f} J")
    record = {"assign": decision.assign.tolist(), "f_alloc": decision.f_alloc.tolist(),
              "p_alloc": decision.p_alloc.tolist(), "total": cost.total}
    (args.out / "decision.json").write_text(json.dumps(record, indent=1) + "\n")
    return 0


def cmd_bench(spec, args) -> int:
    points = [(n, m) for m in args.n_mec for n in args.n_iotd]
    rows = bench_sweep(spec, points, args.draws, progress=log.info)
    path = args.out / "bench.csv"
    write_bench_csv(rows, path)
    for r in rows:
        print(f"N={r.n_iotd:<4} M={r.n_mec:<3} {r.method:<7} objective {r.mean_objective:10.4f}  "
              f"time {r.mean_time_s:8.4f} s  energy {r.mean_energy_j:8.4f} J")
    print(f"wrote {path}")
    return 0


COMMANDS = {"demo-gen": cmd_demo_gen, "train": cmd_train, "infer": cmd_infer,
            "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    log.info("kernel backend: %s", kernels.BACKEND_NAME)
    try:
        spec = load_spec(args.config, seed=args.seed)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](spec, args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
