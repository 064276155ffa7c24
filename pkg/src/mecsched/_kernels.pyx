# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np

from libc.math cimport log2, sqrt

# consts layout, mirrored from _kernels_py
cdef enum:
    BW = 0
    NOISE = 1
    F_LOCAL = 2
    P_EXEC = 3
    F_MAX = 4
    P_MAX = 5
    PHI_T = 6
    PHI_E = 7
    P_MIN = 8
    F_FLOOR = 9


cdef inline double _power_objective(double p, double h, const double[::1] c) noexcept nogil:
    return (c[PHI_T] + c[PHI_E] * p) / log2(1.0 + p * h / c[NOISE])


def golden_power(gains, const double[::1] consts, int iters=60):
    cdef const double[::1] h = np.ascontiguousarray(gains, dtype=np.float64)
    cdef Py_ssize_t n = h.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double inv_phi = (sqrt(5.0) - 1.0) / 2.0
    cdef double lo, hi, x1, x2, g1, g2, mid
    cdef int k
    with nogil:
        for i in range(n):
            lo = consts[P_MIN]
            hi = consts[P_MAX]
            x1 = hi - inv_phi * (hi - lo)
            x2 = lo + inv_phi * (hi - lo)
            g1 = _power_objective(x1, h[i], consts)
            g2 = _power_objective(x2, h[i], consts)
            for k in range(iters):
                if g1 < g2:
                    hi = x2
                    x2 = x1
                    g2 = g1
                    x1 = hi - inv_phi * (hi - lo)
                    g1 = _power_objective(x1, h[i], consts)
                else:
                    lo = x1
                    x1 = x2
                    g1 = g2
                    x2 = lo + inv_phi * (hi - lo)
                    g2 = _power_objective(x2, h[i], consts)
            mid = 0.5 * (lo + hi)
            if _power_objective(consts[P_MAX], h[i], consts) <= _power_objective(mid, h[i], consts):
                o[i] = consts[P_MAX]
            else:
                o[i] = mid
    return out


cdef double _cost_total(const long long[::1] a, const double[::1] f, const double[::1] p,
                        const double[:, ::1] gains, const double[::1] cycles,
                        const double[::1] bits, const double[::1] c) noexcept nogil:
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double total = 0.0, t_loc, rate, t_tx
    for i in range(n):
        if a[i] == 0:
            t_loc = cycles[i] / c[F_LOCAL]
            total += c[PHI_T] * t_loc + c[PHI_E] * t_loc * c[P_EXEC]
        else:
            rate = c[BW] * log2(1.0 + p[i] * gains[i, a[i] - 1] / c[NOISE])
            t_tx = bits[i] / rate
            total += c[PHI_T] * (t_tx + cycles[i] / f[i]) + c[PHI_E] * p[i] * t_tx
    return total


cdef void _repair(const long long[::1] a, double[::1] f, double[::1] p, Py_ssize_t n_mec,
                  const double[::1] c, signed char[::1] free) noexcept nogil:
    cdef Py_ssize_t i, j, n = a.shape[0], n_on, n_pinned
    cdef double s, room, scale
    cdef bint any_low
    for i in range(n):
        if a[i] == 0:
            f[i] = c[F_MAX]
            p[i] = c[P_EXEC]
        if p[i] < c[P_MIN]:
            p[i] = c[P_MIN]
        if p[i] > c[P_MAX]:
            p[i] = c[P_MAX]
        if f[i] < c[F_FLOOR]:
            f[i] = c[F_FLOOR]
        if f[i] > c[F_MAX]:
            f[i] = c[F_MAX]
    for j in range(1, n_mec + 1):
        s = 0.0
        n_on = 0
        for i in range(n):
            if a[i] == j:
                s += f[i]
                n_on += 1
                free[i] = 1
        if n_on == 0 or s <= c[F_MAX]:
            continue
        n_pinned = 0
        while True:
            room = c[F_MAX] - n_pinned * c[F_FLOOR]
            s = 0.0
            for i in range(n):
                if a[i] == j and free[i]:
                    s += f[i]
            if s <= room or room <= 0:
                break
            scale = room / s
            any_low = False
            for i in range(n):
                if a[i] == j and free[i]:
                    f[i] = f[i] * scale
                    if f[i] < c[F_FLOOR]:
                        f[i] = c[F_FLOOR]
                        free[i] = 0
                        n_pinned += 1
                        any_low = True
            if not any_low:
                break


def cost_total(assign, f, p, gains, cycles, bits, const double[::1] consts):
    cdef const long long[::1] a = np.ascontiguousarray(assign, dtype=np.int64)
    return _cost_total(a, np.ascontiguousarray(f, dtype=np.float64),
                       np.ascontiguousarray(p, dtype=np.float64),
                       np.ascontiguousarray(gains, dtype=np.float64),
                       np.ascontiguousarray(cycles, dtype=np.float64),
                       np.ascontiguousarray(bits, dtype=np.float64), consts)


def repair(long long[::1] assign, double[::1] f, double[::1] p, Py_ssize_t n_mec,
           const double[::1] consts):
    free = np.zeros(assign.shape[0], dtype=np.int8)
    cdef signed char[::1] fr = free
    _repair(assign, f, p, n_mec, consts, fr)
    return np.asarray(f), np.asarray(p)


def levy_loop(long long[::1] assign, double[::1] f, double[::1] p,
              const double[:, ::1] gains, const double[::1] cycles, const double[::1] bits,
              const double[:, ::1] d_mut, const long long[:, ::1] randm,
              const double[:, ::1] d_f, const double[:, ::1] d_p,
              const double[:, ::1] d_cross, double th, double eta_f, double eta_p,
              const double[::1] consts, double[::1] trace):
    cdef Py_ssize_t n = assign.shape[0], n_mec = gains.shape[1]
    cdef Py_ssize_t g, i, g_max = d_mut.shape[0]
    ac_arr = np.empty(n, dtype=np.int64)
    fc_arr = np.empty(n, dtype=np.float64)
    pc_arr = np.empty(n, dtype=np.float64)
    rows_arr = np.empty(n, dtype=np.float64)
    free_arr = np.zeros(n, dtype=np.int8)
    cdef long long[::1] ac = ac_arr
    cdef double[::1] fc = fc_arr, pc = pc_arr, rows = rows_arr
    cdef signed char[::1] free = free_arr
    cdef double fit, fit_c, gamma, ratio
    cdef long long am
    cdef Py_ssize_t j
    with nogil:
        for i in range(n):
            rows[i] = 0.0
            for j in range(n_mec):
                rows[i] += gains[i, j]
        fit = _cost_total(assign, f, p, gains, cycles, bits, consts)
        for g in range(g_max):
            gamma = 2.0 - 2.0 * g / g_max
            for i in range(n):
                if n_mec == 0:
                    ratio = 1.0
                elif assign[i] > 0:
                    ratio = gains[i, assign[i] - 1] / rows[i]
                else:
                    ratio = 1.0 / n_mec
                if gamma * d_mut[g, i] > ratio:
                    am = randm[g, i]
                else:
                    am = assign[i]
                if gamma * d_cross[g, i] > th:
                    ac[i] = am
                else:
                    ac[i] = assign[i]
                if gamma * d_cross[g, n + i] > th:
                    fc[i] = f[i] + eta_f * d_f[g, i]
                else:
                    fc[i] = f[i]
                if gamma * d_cross[g, 2 * n + i] > th:
                    pc[i] = p[i] + eta_p * d_p[g, i]
                else:
                    pc[i] = p[i]
            _repair(ac, fc, pc, n_mec, consts, free)
            fit_c = _cost_total(ac, fc, pc, gains, cycles, bits, consts)
            if fit_c < fit:
                for i in range(n):
                    assign[i] = ac[i]
                    f[i] = fc[i]
                    p[i] = pc[i]
                fit = fit_c
            trace[g] = fit
    return fit
