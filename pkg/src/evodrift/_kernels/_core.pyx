# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: all-pairs BFS distance sums and the attention
edge-softmax forward/backward.  Mirrors _kernels.fallback exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def distance_sums(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                  Py_ssize_t n):
    """All-pairs BFS distance sums on an undirected CSR adjacency."""
    sums = np.zeros(n, dtype=np.int64)
    reached = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] sums_v = sums
    cdef cnp.int64_t[::1] reached_v = reached
    cdef cnp.int64_t[::1] dist = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = np.empty(max(n, 1), dtype=np.int64)
    cdef Py_ssize_t s, head, tail, v, j
    cdef cnp.int64_t u, total, cnt, dv
    for s in range(n):
        for v in range(n):
            dist[v] = -1
        dist[s] = 0
        queue[0] = s
        head = 0
        tail = 1
        total = 0
        cnt = 0
        while head < tail:
            v = queue[head]
            head += 1
            dv = dist[v]
            total += dv
            cnt += 1
            for j in range(indptr[v], indptr[v + 1]):
                u = indices[j]
                if dist[u] < 0:
                    dist[u] = dv + 1
                    queue[tail] = u
                    tail += 1
        sums_v[s] = total
        reached_v[s] = cnt
    return sums, reached


def gat_forward(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                const cnp.float64_t[::1] src, const cnp.float64_t[::1] dst,
                const cnp.float64_t[:, ::1] wo, double slope):
    """Single-head attention aggregation over CSR rows (self-loops included)."""
    cdef Py_ssize_t n = src.shape[0]
    cdef Py_ssize_t b = wo.shape[1]
    cdef Py_ssize_t ecount = indices.shape[0]
    f = np.zeros((n, b))
    alpha = np.empty(ecount)
    zbuf = np.empty(ecount)
    cdef cnp.float64_t[:, ::1] f_v = f
    cdef cnp.float64_t[::1] alpha_v = alpha
    cdef cnp.float64_t[::1] z_v = zbuf
    cdef Py_ssize_t i, j, k, col
    cdef double zi, u, m, srow, a
    for i in range(n):
        if indptr[i] == indptr[i + 1]:
            raise ValueError("every row needs at least one entry (self-loop)")
        m = -1e300
        for j in range(indptr[i], indptr[i + 1]):
            zi = src[i] + dst[indices[j]]
            z_v[j] = zi
            u = zi if zi >= 0 else slope * zi
            if u > m:
                m = u
        srow = 0.0
        for j in range(indptr[i], indptr[i + 1]):
            zi = z_v[j]
            u = zi if zi >= 0 else slope * zi
            a = exp(u - m)
            alpha_v[j] = a
            srow += a
        for j in range(indptr[i], indptr[i + 1]):
            a = alpha_v[j] / srow
            alpha_v[j] = a
            col = indices[j]
            for k in range(b):
                f_v[i, k] += a * wo[col, k]
    return f, alpha, zbuf


def gat_backward(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                 const cnp.float64_t[::1] alpha, const cnp.float64_t[::1] z,
                 const cnp.float64_t[:, ::1] wo, const cnp.float64_t[:, ::1] df,
                 double slope):
    """Backward pass of gat_forward given df = dL/df."""
    cdef Py_ssize_t n = df.shape[0]
    cdef Py_ssize_t b = wo.shape[1]
    cdef Py_ssize_t ecount = indices.shape[0]
    dwo = np.zeros((wo.shape[0], b))
    dsrc = np.zeros(n)
    ddst = np.zeros(wo.shape[0])
    gbuf = np.empty(ecount)
    cdef cnp.float64_t[:, ::1] dwo_v = dwo
    cdef cnp.float64_t[::1] dsrc_v = dsrc
    cdef cnp.float64_t[::1] ddst_v = ddst
    cdef cnp.float64_t[::1] g_v = gbuf
    cdef Py_ssize_t i, j, k, col
    cdef double g, c, du, dz, a
    for i in range(n):
        c = 0.0
        for j in range(indptr[i], indptr[i + 1]):
            col = indices[j]
            g = 0.0
            for k in range(b):
                g += df[i, k] * wo[col, k]
            g_v[j] = g
            a = alpha[j]
            c += a * g
            for k in range(b):
                dwo_v[col, k] += a * df[i, k]
        for j in range(indptr[i], indptr[i + 1]):
            du = alpha[j] * (g_v[j] - c)
            dz = du if z[j] >= 0 else slope * du
            dsrc_v[i] += dz
            ddst_v[indices[j]] += dz
    return dwo, dsrc, ddst
