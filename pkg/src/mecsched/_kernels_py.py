"""Pure-numpy implementations of the hot kernels.

Every function here has a compiled twin in ``_kernels.pyx`` with the same
signature and semantics; ``mecsched.kernels`` picks one at import time.
All randomness is supplied by the caller as pre-drawn arrays.

``consts`` is the float64 vector built by ``kernels.pack_consts``.
"""

from __future__ import annotations

import numpy as np

BW, NOISE, F_LOCAL, P_EXEC, F_MAX, P_MAX, PHI_T, PHI_E, P_MIN, F_FLOOR = range(10)
N_CONSTS = 10

_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def _power_objective(p, h, c):
    # (phi_t + phi_e p) / log2(1 + p h / noise); bandwidth and data size are
    # positive constant factors and do not move the argmin.
    return (c[PHI_T] + c[PHI_E] * p) / np.log2(1.0 + p * h / c[NOISE])


def golden_power(gains, consts, iters=60):
    """Per-device argmin of the transmit objective over [P_MIN, P_MAX]."""
    h = np.asarray(gains, dtype=float)
    c = consts
    lo = np.full(h.shape, c[P_MIN])
    hi = np.full(h.shape, c[P_MAX])
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    g1 = _power_objective(x1, h, c)
    g2 = _power_objective(x2, h, c)
    for _ in range(iters):
        left = g1 < g2
        # left: minimum in [lo, x2]; else in [x1, hi]
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        nx1 = np.where(left, hi - _INV_PHI * (hi - lo), x2)
        nx2 = np.where(left, x1, lo + _INV_PHI * (hi - lo))
        ng1 = np.where(left, _power_objective(nx1, h, c), g2)
        ng2 = np.where(left, g1, _power_objective(nx2, h, c))
        x1, x2, g1, g2 = nx1, nx2, ng1, ng2
    mid = 0.5 * (lo + hi)
    top = np.full(h.shape, c[P_MAX])
    return np.where(_power_objective(top, h, c) <= _power_objective(mid, h, c), top, mid)


def cost_total(assign, f, p, gains, cycles, bits, consts):
    c = consts
    local = assign == 0
    t_loc = cycles[local] / c[F_LOCAL]
    total = np.sum(c[PHI_T] * t_loc + c[PHI_E] * t_loc * c[P_EXEC])
    off = np.flatnonzero(~local)
    if off.size:
        h = gains[off, assign[off] - 1]
        rate = c[BW] * np.log2(1.0 + p[off] * h / c[NOISE])
        t_tx = bits[off] / rate
        total += np.sum(c[PHI_T] * (t_tx + cycles[off] / f[off]) + c[PHI_E] * p[off] * t_tx)
    return float(total)


def repair(assign, f, p, n_mec, consts):
    """Clamp (f, p) to their ranges and fit each server's compute budget, in place."""
    c = consts
    # Local devices park at (F_max, p_exec): if one later offloads, the
    # proportional rescale below hands it a share of its server.
    local = assign == 0
    f[local] = c[F_MAX]
    p[local] = c[P_EXEC]
    np.minimum(np.maximum(p, c[P_MIN]), c[P_MAX], out=p)
    np.minimum(np.maximum(f, c[F_FLOOR]), c[F_MAX], out=f)
    for j in range(1, n_mec + 1):
        idx = np.flatnonzero(assign == j)
        if idx.size == 0 or np.sum(f[idx]) <= c[F_MAX]:
            continue
        free = np.ones(idx.size, dtype=bool)
        while True:
            n_pinned = idx.size - int(np.count_nonzero(free))
            room = c[F_MAX] - n_pinned * c[F_FLOOR]
            vals = f[idx[free]]
            s = np.sum(vals)
            if s <= room or room <= 0:
                break
            vals = vals * (room / s)
            low = vals < c[F_FLOOR]
            vals[low] = c[F_FLOOR]
            f[idx[free]] = vals
            if not np.any(low):
                break
            sub = np.flatnonzero(free)
            free[sub[low]] = False
    return f, p


def mutate(assign, f, p, ratio, gamma, d_mut, randm, d_f, d_p, eta_f, eta_p):
    """Channel-gated integer mutation plus additive Levy steps on f and p."""
    flip = gamma * d_mut > ratio
    am = np.where(flip, randm, assign)
    return am, f + eta_f * d_f, p + eta_p * d_p


def crossover(mutant, target, gamma, d_cross, th):
    """Coordinate-wise mix over the stacked [a, f, p] vector."""
    (am, fm, pm), (at, ft, pt) = mutant, target
    n = at.shape[0]
    take = gamma * d_cross > th
    return (np.where(take[:n], am, at), np.where(take[n:2 * n], fm, ft),
            np.where(take[2 * n:], pm, pt))


def stability_ratio(assign, gains):
    """Normalized gain of each IoTD's current server; 1/M for local devices."""
    m = gains.shape[1]
    if m == 0:
        return np.ones(assign.shape[0])
    rows = gains.sum(axis=1)
    safe = np.maximum(assign - 1, 0)
    own = gains[np.arange(assign.shape[0]), safe]
    return np.where(assign > 0, own / rows, 1.0 / m)


def levy_loop(assign, f, p, gains, cycles, bits, d_mut, randm, d_f, d_p, d_cross,
              th, eta_f, eta_p, consts, trace):
    """Run the search in place from a repaired start; returns best fitness.

    Draw arrays have one row per iteration: ``d_mut, randm, d_f, d_p`` are
    (G, N) and ``d_cross`` is (G, 3N).  ``trace[g]`` receives the incumbent
    fitness after iteration ``g``.
    """
    g_max = d_mut.shape[0]
    n_mec = gains.shape[1]
    fit = cost_total(assign, f, p, gains, cycles, bits, consts)
    for g in range(g_max):
        gamma = 2.0 - 2.0 * g / g_max
        ratio = stability_ratio(assign, gains)
        mut = mutate(assign, f, p, ratio, gamma, d_mut[g], randm[g], d_f[g], d_p[g],
                     eta_f, eta_p)
        ac, fc, pc = crossover(mut, (assign, f, p), gamma, d_cross[g], th)
        repair(ac, fc, pc, n_mec, consts)
        fit_c = cost_total(ac, fc, pc, gains, cycles, bits, consts)
        if fit_c < fit:
            assign[:] = ac
            f[:] = fc
            p[:] = pc
            fit = fit_c
        trace[g] = fit
    return fit
