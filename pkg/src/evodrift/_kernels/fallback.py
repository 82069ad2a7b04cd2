"""Pure-numpy implementations of the hot kernels.

Used when the compiled extension is unavailable (or explicitly requested via
``EVODRIFT_KERNELS=fallback``).  Function signatures and semantics match
``_core`` exactly; floating-point results may differ from the compiled
backend in the last bits because numpy's segmented reductions are free to
reassociate sums.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

__all__ = ["distance_sums", "gat_forward", "gat_backward"]


def distance_sums(indptr, indices, n):
    """All-pairs BFS distance sums on an undirected CSR adjacency.

    Returns ``(sums, reached)`` where ``sums[i]`` is the sum of hop counts
    from i to every node it can reach and ``reached[i]`` counts those nodes
    (including i itself).
    """
    if n == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    data = np.ones(len(indices), dtype=np.int8)
    adj = csr_matrix((data, np.asarray(indices), np.asarray(indptr)),
                     shape=(n, n))
    dist = dijkstra(adj, unweighted=True, directed=False)
    finite = np.isfinite(dist)
    sums = np.where(finite, dist, 0.0).sum(axis=1)
    reached = finite.sum(axis=1)
    return sums.astype(np.int64), reached.astype(np.int64)


def _expand_rows(indptr):
    counts = np.diff(indptr)
    return np.repeat(np.arange(len(counts)), counts)


def gat_forward(indptr, indices, src, dst, wo, slope):
    """Single-head attention aggregation over CSR rows (self-loops included).

    Per entry e in row i with column j: z_e = src[i] + dst[j], scores are
    LeakyReLU(z_e) softmax-normalized within the row, and the output row is
    the score-weighted sum of wo[j].  Returns (f, alpha, z) with alpha and z
    per CSR entry, cached for the backward pass.
    """
    indptr = np.asarray(indptr)
    indices = np.asarray(indices)
    if np.any(np.diff(indptr) == 0):
        raise ValueError("every row needs at least one entry (self-loop)")
    rows = _expand_rows(indptr)
    z = src[rows] + dst[indices]
    u = np.where(z >= 0, z, slope * z)
    row_max = np.maximum.reduceat(u, indptr[:-1])
    w = np.exp(u - row_max[rows])
    row_sum = np.add.reduceat(w, indptr[:-1])
    alpha = w / row_sum[rows]
    f = np.add.reduceat(alpha[:, None] * wo[indices], indptr[:-1], axis=0)
    return f, alpha, z


def gat_backward(indptr, indices, alpha, z, wo, df, slope):
    """Backward pass of :func:`gat_forward` given df = dL/df.

    Returns (dwo, dsrc, ddst): the gradient contribution to the projected
    inputs from the aggregation term, and the gradients of the per-node
    source/destination attention scores.  The caller folds dsrc/ddst back
    into dwo and the attention parameters.
    """
    indptr = np.asarray(indptr)
    indices = np.asarray(indices)
    rows = _expand_rows(indptr)
    g = np.einsum("eb,eb->e", df[rows], wo[indices])
    dwo = np.zeros_like(wo)
    np.add.at(dwo, indices, alpha[:, None] * df[rows])
    row_dot = np.add.reduceat(alpha * g, indptr[:-1])
    du = alpha * (g - row_dot[rows])
    dz = np.where(z >= 0, du, slope * du)
    dsrc = np.add.reduceat(dz, indptr[:-1])
    ddst = np.zeros(len(indptr) - 1)
    np.add.at(ddst, indices, dz)
    return dwo, dsrc, ddst
