"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Arithmetic is ordered exactly as in the Cython source so that the two backends
agree bit for bit.
"""

import numpy as np


def gibbs_sweep(users, times, cats, z, n_uz, n_tz, n_zv, n_z,
                alpha, beta, gamma, temporal, uniforms):
    K = n_z.shape[0]
    vbeta = n_zv.shape[1] * beta
    # list-of-lists indexing is several times faster than numpy scalar access
    uz, tz, zv, nz = n_uz.tolist(), n_tz.tolist(), n_zv.tolist(), n_z.tolist()
    zl = z.tolist()
    cum = [0.0] * K
    krange = range(K)
    for i, (u, t, v, unif) in enumerate(zip(users.tolist(), times.tolist(), cats.tolist(), uniforms.tolist())):
        old = zl[i]
        ru, rt = uz[u], tz[t]
        ru[old] -= 1
        rt[old] -= 1
        zv[old][v] -= 1
        nz[old] -= 1

        total = 0.0
        if temporal:
            for k in krange:
                total = total + (ru[k] + alpha) * (rt[k] + gamma) * (zv[k][v] + beta) / (nz[k] + vbeta)
                cum[k] = total
        else:
            for k in krange:
                total = total + (ru[k] + alpha) * (zv[k][v] + beta) / (nz[k] + vbeta)
                cum[k] = total
        target = unif * total
        new = K - 1
        for k in krange:
            if cum[k] > target:
                new = k
                break

        zl[i] = new
        ru[new] += 1
        rt[new] += 1
        zv[new][v] += 1
        nz[new] += 1

    z[:] = zl
    n_uz[:] = uz
    n_tz[:] = tz
    n_zv[:] = zv
    n_z[:] = nz


def optics_order(xy, core, max_dist):
    n = xy.shape[0]
    order = np.empty(n, dtype=np.int64)
    reach = np.empty(n, dtype=np.float64)
    if n == 0:
        return order, reach
    x, y = xy[:, 0], xy[:, 1]
    rd = np.full(n, max_dist, dtype=np.float64)
    rd[0] = 0.0
    done = np.zeros(n, dtype=bool)
    ind = 0
    for step in range(n):
        done[ind] = True
        order[step] = ind
        reach[step] = rd[ind]
        if step == n - 1:
            break
        dx = x - x[ind]
        dy = y - y[ind]
        d = np.sqrt(dx * dx + dy * dy)
        cur = np.maximum(core[ind], d)
        rd = np.where(done, rd, np.minimum(rd, cur))
        ind = int(np.argmin(np.where(done, np.inf, rd)))
    return order, reach
