"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20] [--n-iotd 30]

Both backends get identical inputs (including the pre-drawn search
randomness), so the printed objectives must agree.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from mecsched import _kernels_py, kernels
from mecsched.levy import DEMONSTRATION, ONLINE, draw_search
from mecsched.sysmodel import SystemConfig, compute_channel, random_topology


def _case(n, seed=0):
    cfg = SystemConfig(n_iotd=n, n_mec=2)
    rng = np.random.default_rng(seed)
    gains = compute_channel(random_topology(cfg, rng), cfg).gains
    a = rng.integers(0, 3, n).astype(np.int64)
    f = rng.uniform(1e9, 30e9, n)
    p = rng.uniform(0.1, 1.5, n)
    return cfg, rng, gains, a, f, p, np.full(n, 1e9), np.full(n, 8e5)


def _loop(mod, cfg, params, draws, gains, a, f, p, cycles, bits, consts):
    a, f, p = a.copy(), f.copy(), p.copy()
    trace = np.empty(params.g_max)
    return mod.levy_loop(a, f, p, gains, cycles, bits, draws.d_mut, draws.randm, draws.d_f,
                         draws.d_p, draws.d_cross, params.th, params.eta * cfg.f_mec_max,
                         params.eta * cfg.p_iotd_max, consts, trace)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--n-iotd", type=int, default=30)
    args = ap.parse_args(argv)

    fast = kernels.compiled_backend()
    if fast is None:
        print("compiled kernels unavailable; only the numpy fallback is timed")
    cfg, rng, gains, a, f, p, cycles, bits = _case(args.n_iotd)
    consts = kernels.pack_consts(cfg)
    _kernels_py.repair(a, f, p, cfg.n_mec, consts)
    h = gains.ravel()

    jobs = {
        "golden_power": lambda m: m.golden_power(h, consts),
        "cost_total": lambda m: m.cost_total(a, f, p, gains, cycles, bits, consts),
        "repair": lambda m: m.repair(a, f.copy(), p.copy(), cfg.n_mec, consts),
    }
    for name, params in (("levy_loop(online)", ONLINE), ("levy_loop(demo)", DEMONSTRATION)):
        draws = draw_search(rng, params, cfg, args.n_iotd)
        jobs[name] = (lambda pr, dr: lambda m: _loop(m, cfg, pr, dr, gains, a, f, p, cycles,
                                                     bits, consts))(params, draws)

    backends = [("python", _kernels_py)] + ([("cython", fast)] if fast is not None else [])
    print(f"N={args.n_iotd}, best of {args.repeat} runs, milliseconds per call")
    print(f"{'kernel':<20}" + "".join(f"{n:>12}" for n, _ in backends) + f"{'speedup':>10}")
    for name, job in jobs.items():
        times = []
        for _, mod in backends:
            per = min(timeit.repeat(lambda: job(mod), number=1, repeat=args.repeat))
            times.append(per * 1e3)
        speed = f"{times[0] / times[1]:>9.1f}x" if len(times) == 2 else ""
        print(f"{name:<20}" + "".join(f"{t:>12.4f}" for t in times) + speed)
        if name.startswith("levy") and fast is not None:
            x, y = job(_kernels_py), job(fast)
            assert abs(x - y) <= 1e-9 * abs(x), (x, y)


if __name__ == "__main__":
    main()
