# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.  Must stay operation-for-operation identical to
``_pykernels`` so both backends produce bit-identical results."""

from libc.math cimport sqrt, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()


def gibbs_sweep(const int[::1] users, const int[::1] times, const int[::1] cats,
                int[::1] z, int[:, ::1] n_uz, int[:, ::1] n_tz, int[:, ::1] n_zv,
                int[::1] n_z, double alpha, double beta, double gamma,
                bint temporal, const double[::1] uniforms):
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t K = n_z.shape[0]
    cdef double vbeta = n_zv.shape[1] * beta
    cdef Py_ssize_t i, k
    cdef int u, t, v, old, new
    cdef double total, target, p
    cdef double[::1] cum = np.empty(K, dtype=np.float64)

    for i in range(n):
        u = users[i]
        t = times[i]
        v = cats[i]
        old = z[i]
        n_uz[u, old] -= 1
        n_tz[t, old] -= 1
        n_zv[old, v] -= 1
        n_z[old] -= 1

        total = 0.0
        for k in range(K):
            if temporal:
                p = (n_uz[u, k] + alpha) * (n_tz[t, k] + gamma) * (n_zv[k, v] + beta) / (n_z[k] + vbeta)
            else:
                p = (n_uz[u, k] + alpha) * (n_zv[k, v] + beta) / (n_z[k] + vbeta)
            total = total + p
            cum[k] = total
        target = uniforms[i] * total
        new = <int>(K - 1)
        for k in range(K):
            if cum[k] > target:
                new = <int>k
                break

        z[i] = new
        n_uz[u, new] += 1
        n_tz[t, new] += 1
        n_zv[new, v] += 1
        n_z[new] += 1


def optics_order(const double[:, ::1] xy, const double[::1] core, double max_dist):
    cdef Py_ssize_t n = xy.shape[0]
    cdef Py_ssize_t step, j, ind = 0, best
    cdef double dx, dy, d, cur, best_rd
    order_arr = np.empty(n, dtype=np.int64)
    reach_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] order = order_arr
    cdef double[::1] reach_pos = reach_arr
    cdef double[::1] rd = np.full(n, max_dist, dtype=np.float64)
    cdef cnp.uint8_t[::1] done = np.zeros(n, dtype=np.uint8)
    if n == 0:
        return order_arr, reach_arr
    rd[0] = 0.0

    for step in range(n):
        done[ind] = 1
        order[step] = ind
        reach_pos[step] = rd[ind]
        best = -1
        best_rd = INFINITY
        for j in range(n):
            if done[j]:
                continue
            dx = xy[j, 0] - xy[ind, 0]
            dy = xy[j, 1] - xy[ind, 1]
            d = sqrt(dx * dx + dy * dy)
            cur = core[ind] if core[ind] > d else d
            if cur < rd[j]:
                rd[j] = cur
            if best < 0 or rd[j] < best_rd:
                best = j
                best_rd = rd[j]
        ind = best
    return order_arr, reach_arr
