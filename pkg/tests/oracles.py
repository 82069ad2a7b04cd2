"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written from first principles with dense
numpy (or plain loops) and must not import package internals beyond plain
data containers, so that an agreement between package output and an oracle
is evidence rather than a tautology.
"""

import numpy as np


def gd_linear_fit(design: np.ndarray, y: np.ndarray,
                  steps: int = 100_000, lr: float = 1e-3) -> np.ndarray:
    """Least-squares weights by plain gradient descent on ||design @ w - y||^2.

    Slow and simple on purpose; with the step sizes used in the tests the
    iterate converges far past the comparison tolerance.
    """
    design = np.asarray(design, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    shape = (design.shape[1],) if y.ndim == 1 else (design.shape[1], y.shape[1])
    w = np.zeros(shape)
    for _ in range(steps):
        resid = design @ w - y
        w = w - lr * 2.0 * (design.T @ resid)
    return w


def sum_of_squares(design: np.ndarray, w: np.ndarray, y: np.ndarray) -> float:
    resid = design @ w - y
    return float((resid * resid).sum())


def zero_center_distortion_mean(width: int, xi: float, slope: float,
                                s0: np.ndarray, s1: np.ndarray) -> float:
    """Exact expected squared output change for the perturbed one-layer
    model centered at the zero parameter point, in the special case where
    the two mean-neighbor-feature vectors are parallel: s1 = gamma * s0
    with 0 <= gamma <= 1.

    With a ~ U(-xi, xi) and w rows ~ U(-xi, xi)^dim, b = 0, each hidden
    unit contributes independently:

        E[a^2] * E[(leaky(w.s0) - leaky(gamma * w.s0))^2]
      = (xi^2/3) * (1 - gamma)^2 * E[(w.s0)^2] * (1 + slope^2) / 2

    because leaky(z) - leaky(gamma z) equals (1-gamma) z for z >= 0 and
    slope (1-gamma) z for z < 0, each half carrying probability 1/2 and
    conditional second moment E[(w.s0)^2].  w.s0 is a sum of independent
    uniforms, so E[(w.s0)^2] = (xi^2/3) * ||s0||^2.
    """
    s0 = np.asarray(s0, dtype=np.float64)
    s1 = np.asarray(s1, dtype=np.float64)
    denom = float(s0 @ s0)
    if denom == 0.0:
        raise ValueError("s0 must be non-zero")
    gamma = float(s1 @ s0) / denom
    if not np.allclose(s1, gamma * s0):
        raise ValueError("oracle only covers parallel feature vectors")
    per_unit = ((xi ** 2 / 3.0) * (1.0 - gamma) ** 2
                * (xi ** 2 / 3.0) * denom * (1.0 + slope ** 2) / 2.0)
    return width * per_unit


def central_difference(f, x, h=1e-5):
    """Central finite-difference gradient of a scalar function at x."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    out = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        fp = f(x)
        flat[i] = keep - h
        fm = f(x)
        flat[i] = keep
        out[i] = (fp - fm) / (2.0 * h)
    return g


def dense_normalized_adjacency(n, edge_list):
    """Row-normalized self-looped adjacency built densely from scratch."""
    a = np.eye(n)
    for u, v in edge_list:
        a[u, v] = 1.0
        a[v, u] = 1.0
    return a / a.sum(axis=1, keepdims=True)


def dense_gcn(l_dense, x, weights, activation="relu", slope=0.2,
              final_activation=False):
    """Stacked graph convolution via plain dense matmuls."""
    h = np.asarray(x, dtype=np.float64)
    for k, w in enumerate(weights):
        p = l_dense @ h @ w
        last = k == len(weights) - 1
        if last and not final_activation:
            h = p
        elif activation == "relu":
            h = np.maximum(p, 0.0)
        elif activation == "leaky":
            h = np.where(p >= 0, p, slope * p)
        else:
            h = p
    return h


def dense_attention(n, edge_list, o, w, a_src, a_dst, slope=0.2):
    """Single-head attention by an explicit per-node loop (self included)."""
    wo = o @ w
    nbrs = {i: {i} for i in range(n)}
    for u, v in edge_list:
        nbrs[u].add(v)
        nbrs[v].add(u)
    f = np.zeros_like(wo)
    for i in range(n):
        js = sorted(nbrs[i])
        raw = []
        for j in js:
            score = float(a_src @ wo[i] + a_dst @ wo[j])
            raw.append(score if score >= 0 else slope * score)
        raw = np.array(raw)
        weights = np.exp(raw - raw.max())
        weights = weights / weights.sum()
        for wk, j in zip(weights, js):
            f[i] += wk * wo[j]
    return f


def reference_lstm_step(x, h, c, w_in, w_rec, bias, w_out, b_out):
    """Independently coded LSTM cell with scalar linear readout.

    Gate rows ordered input, forget, candidate, output.
    """
    def sig(v):
        return 1.0 / (1.0 + np.exp(-v))

    hidden = len(h)
    z = w_in @ x + w_rec @ h + bias
    gate_in = sig(z[0:hidden])
    gate_forget = sig(z[hidden:2 * hidden])
    cand = np.tanh(z[2 * hidden:3 * hidden])
    gate_out = sig(z[3 * hidden:4 * hidden])
    c2 = gate_forget * c + gate_in * cand
    h2 = gate_out * np.tanh(c2)
    y = float(w_out @ h2 + b_out)
    return y, h2, c2


def bfs_closeness(n, edge_list):
    """All-pairs BFS closeness, coded independently over an adjacency dict.

    Returns (n - 1) / sum_of_distances per node and raises ValueError when
    some node cannot reach every other node.
    """
    from collections import deque

    neighbors = {i: [] for i in range(n)}
    for u, v in edge_list:
        neighbors[int(u)].append(int(v))
        neighbors[int(v)].append(int(u))
    out = np.zeros(n)
    if n == 1:
        return out
    for src in range(n):
        dist = [-1] * n
        dist[src] = 0
        queue = deque([src])
        while queue:
            cur = queue.popleft()
            for nxt in neighbors[cur]:
                if dist[nxt] < 0:
                    dist[nxt] = dist[cur] + 1
                    queue.append(nxt)
        if min(dist) < 0:
            raise ValueError(f"node {src} cannot reach the whole graph")
        out[src] = (n - 1) / float(sum(dist))
    return out
