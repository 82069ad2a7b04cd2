"""Synthetic evolving-graph generators and label models.

Growth follows preferential attachment: each timestep adds one node whose m
edges attach to existing nodes with probability proportional to degree,
sampled without replacement by repeated degree-proportional draws that reject
already-chosen targets.  The seed graph is a ring, so every node has positive
degree from the start.  Edges persist forever and node features are drawn
once at arrival.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import distance_sums
from .errors import ConfigError, DisconnectedGraphError, ZeroDegreeError
from .graphs import EvolvingGraph, GraphSnapshot

__all__ = [
    "BaConfig",
    "DualBaConfig",
    "DegreeHistogram",
    "ba_evolve",
    "dual_ba_evolve",
    "ba_degree_histogram",
    "dual_ba_degree_histogram",
    "attachment_targets",
    "gaussian_features",
    "power_labels",
    "closeness_labels",
    "degree_histogram",
    "degree_tail_slope",
]


@dataclass(frozen=True)
class BaConfig:
    """Preferential-attachment growth: m edges per arrival over `horizon`
    arrival steps.

    `seed_graph` picks the shape of snapshot 0: "ring" starts from a plain
    cycle over n0 nodes, "grown" builds snapshot 0 itself by preferential
    attachment from a small ring core, so the sequence starts already
    scale-free.
    """

    n0: int
    m: int
    horizon: int
    seed_graph: str = "ring"

    def __post_init__(self):
        if self.n0 < 3:
            raise ConfigError("ring seed needs n0 >= 3")
        if not 1 <= self.m <= self.n0:
            raise ConfigError(f"m must satisfy 1 <= m <= n0, got {self.m}")
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if self.seed_graph not in ("ring", "grown"):
            raise ConfigError(
                f"seed_graph must be 'ring' or 'grown', got {self.seed_graph!r}")


@dataclass(frozen=True)
class DualBaConfig:
    """Two-mode preferential attachment: each arrival brings m1 edges with
    probability p, otherwise m2 edges.  `seed_graph` as in BaConfig."""

    n0: int
    m1: int
    m2: int
    p: float = 0.5
    horizon: int = 1
    seed_graph: str = "ring"

    def __post_init__(self):
        if self.n0 < 3:
            raise ConfigError("ring seed needs n0 >= 3")
        for m in (self.m1, self.m2):
            if not 1 <= m <= self.n0:
                raise ConfigError(f"edge counts must lie in [1, n0], got {m}")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"mix probability {self.p} not in [0, 1]")
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if self.seed_graph not in ("ring", "grown"):
            raise ConfigError(
                f"seed_graph must be 'ring' or 'grown', got {self.seed_graph!r}")


def _ring_edges(n0: int) -> list[tuple[int, int]]:
    return [(i, (i + 1) % n0) for i in range(n0)]


def attachment_targets(repeated: list[int], m: int, rng) -> list[int]:
    """m distinct targets, degree-proportional via the repeated-node trick.

    ``repeated`` lists each existing node once per unit of degree; draws that
    hit an already-chosen target are rejected and redrawn.
    """
    chosen: list[int] = []
    seen: set[int] = set()
    width = len(repeated)
    while len(chosen) < m:
        t = repeated[int(rng.integers(width))]
        if t not in seen:
            seen.add(t)
            chosen.append(t)
    return chosen


def _evolve(n0: int, horizon: int, pick_m, rng, materialize: bool,
            core_n: int | None = None):
    """Shared growth loop.

    When ``materialize`` is true, returns the full snapshot list; otherwise
    returns only the final degree vector.  Both paths consume the identical
    draw sequence from ``rng``.

    ``core_n`` selects the grown seed: the ring covers only the first
    ``core_n`` nodes and snapshot 0 is reached by running the same
    attachment rule up to n0 nodes.  ``None`` keeps the plain ring seed
    over all n0 nodes.
    """
    start = n0 if core_n is None else core_n
    edges = _ring_edges(start)
    repeated: list[int] = []
    for u, v in edges:
        repeated.append(u)
        repeated.append(v)
    for new in range(start, n0):
        m = pick_m(rng)
        targets = attachment_targets(repeated, m, rng)
        edges.extend((t, new) for t in targets)
        repeated.extend(targets)
        repeated.extend([new] * m)
    snaps = []
    if materialize:
        snaps.append(GraphSnapshot(n=n0, edges=np.array(edges),
                                   features=np.zeros((n0, 0)), time_index=0))
    for k in range(1, horizon + 1):
        new = n0 + k - 1
        m = pick_m(rng)
        targets = attachment_targets(repeated, m, rng)
        edges.extend((t, new) for t in targets)
        repeated.extend(targets)
        repeated.extend([new] * m)
        if materialize:
            snaps.append(GraphSnapshot(n=n0 + k, edges=np.array(edges),
                                       features=np.zeros((n0 + k, 0)),
                                       time_index=k))
    if materialize:
        return EvolvingGraph(tuple(snaps))
    degrees = np.bincount(np.array(repeated, dtype=np.int64),
                          minlength=n0 + horizon)
    return degrees.astype(np.int64)


def _ba_core(cfg: BaConfig) -> int | None:
    return None if cfg.seed_graph == "ring" else max(cfg.m, 3)


def _dual_core(cfg: DualBaConfig) -> int | None:
    return None if cfg.seed_graph == "ring" else max(cfg.m1, cfg.m2, 3)


def ba_evolve(cfg: BaConfig, rng) -> EvolvingGraph:
    """Grow a preferential-attachment sequence with horizon+1 snapshots."""
    return _evolve(cfg.n0, cfg.horizon, lambda r: cfg.m, rng,
                   materialize=True, core_n=_ba_core(cfg))


def dual_ba_evolve(cfg: DualBaConfig, rng) -> EvolvingGraph:
    """Two-mode growth: the edge count is drawn before the targets."""

    def pick(r):
        return cfg.m1 if r.random() < cfg.p else cfg.m2

    return _evolve(cfg.n0, cfg.horizon, pick, rng, materialize=True,
                   core_n=_dual_core(cfg))


def ba_degree_histogram(cfg: BaConfig, rng) -> "DegreeHistogram":
    """Final-snapshot degree histogram without materializing snapshots.

    Identical draws to :func:`ba_evolve`, so for equal (cfg, stream) it
    matches ``degree_histogram(ba_evolve(cfg, rng)[-1])`` exactly.  Meant for
    large horizons where storing every snapshot would be wasteful.
    """
    deg = _evolve(cfg.n0, cfg.horizon, lambda r: cfg.m, rng,
                  materialize=False, core_n=_ba_core(cfg))
    return _histogram_from_degrees(deg)


def dual_ba_degree_histogram(cfg: DualBaConfig, rng) -> "DegreeHistogram":
    def pick(r):
        return cfg.m1 if r.random() < cfg.p else cfg.m2

    deg = _evolve(cfg.n0, cfg.horizon, pick, rng, materialize=False,
                  core_n=_dual_core(cfg))
    return _histogram_from_degrees(deg)


def gaussian_features(g: EvolvingGraph, dim: int, rng,
                      overwrite: bool = False) -> EvolvingGraph:
    """Attach i.i.d. standard-normal features, frozen at node arrival.

    The full (final_n, dim) matrix is drawn once in node order; snapshot k
    sees the first n_k rows, so a node's row never changes after arrival.
    """
    if dim < 1:
        raise ConfigError("feature dim must be positive")
    if g.feature_dim > 0 and not overwrite:
        raise ConfigError("sequence already has features; "
                          "pass overwrite=True to replace them")
    final_n = g.snapshots[-1].n
    x = rng.normal(size=(final_n, dim))
    snaps = tuple(s.replace(features=x[: s.n]) for s in g.snapshots)
    return EvolvingGraph(snaps)


def power_labels(s: GraphSnapshot, alpha: float, col: int) -> np.ndarray:
    """y_i = deg(i)^alpha * X[i, col], using the snapshot's own degrees."""
    if not 0 <= col < s.feature_dim:
        raise ConfigError(
            f"feature column {col} outside [0, {s.feature_dim})")
    deg = s.degrees
    if (deg == 0).any():
        raise ZeroDegreeError("power labels need positive degrees")
    return deg.astype(np.float64) ** alpha * s.features[:, col]


def closeness_labels(s: GraphSnapshot) -> np.ndarray:
    """Exact closeness centrality (n-1) / sum_j dist(i, j) via BFS."""
    if s.n == 1:
        return np.zeros(1)
    indptr, indices = s.csr()
    sums, reached = distance_sums(np.ascontiguousarray(indptr),
                                  np.ascontiguousarray(indices), s.n)
    if (reached < s.n).any():
        raise DisconnectedGraphError(
            "closeness centrality needs a connected snapshot")
    return (s.n - 1.0) / sums


@dataclass(frozen=True)
class DegreeHistogram:
    """Degree counts of one snapshot; index d holds the number of degree-d
    nodes."""

    counts: np.ndarray
    n: int

    def probabilities(self) -> np.ndarray:
        return self.counts / self.n

    def moment(self, power: float) -> float:
        """E[d^power] over nodes; rejects zero degrees for negative powers."""
        if power < 0 and self.counts[0] > 0:
            raise ZeroDegreeError(
                "negative-power moment undefined with zero-degree nodes")
        d = np.flatnonzero(self.counts)
        d = d[d > 0] if power < 0 else d
        weights = self.counts[d]
        return float((weights * d.astype(np.float64) ** power).sum() / self.n)

    @property
    def min_degree(self) -> int:
        return int(np.flatnonzero(self.counts)[0])

    @property
    def max_degree(self) -> int:
        return int(np.flatnonzero(self.counts)[-1])


def _histogram_from_degrees(deg: np.ndarray) -> DegreeHistogram:
    counts = np.bincount(deg)
    frozen = counts.astype(np.int64)
    frozen.flags.writeable = False
    return DegreeHistogram(counts=frozen, n=int(len(deg)))


def degree_histogram(s: GraphSnapshot) -> DegreeHistogram:
    return _histogram_from_degrees(s.degrees)


def degree_tail_slope(hist: DegreeHistogram, d_min: int,
                      bin_factor: float = 2.0, min_count: int = 10) -> float:
    """Log-log slope of the degree-distribution tail.

    Degrees >= d_min are grouped into geometric bins [lo, lo*bin_factor);
    each bin contributes a point (log geometric-mean degree, log density)
    where density is the bin's node fraction divided by its integer width.
    Bins with fewer than min_count nodes are discarded, and the slope is the
    least-squares line through the remaining points.
    """
    if bin_factor <= 1.0:
        raise ConfigError("bin_factor must exceed 1")
    max_d = hist.max_degree
    if d_min < 1 or d_min > max_d:
        raise ConfigError(f"d_min {d_min} outside [1, {max_d}]")
    xs, ys = [], []
    lo = float(d_min)
    while lo <= max_d:
        hi = lo * bin_factor
        lo_i, hi_i = int(np.ceil(lo)), int(np.ceil(hi))
        hi_i = min(hi_i, len(hist.counts))
        if hi_i > lo_i:
            total = int(hist.counts[lo_i:hi_i].sum())
            if total >= min_count:
                density = total / (hist.n * (hi_i - lo_i))
                xs.append(np.log(np.sqrt(lo_i * (hi_i - 1))))
                ys.append(np.log(density))
        lo = hi
    if len(xs) < 2:
        raise ConfigError("tail too short for a slope fit; lower min_count "
                          "or d_min")
    slope, _ = np.polyfit(np.array(xs), np.array(ys), 1)
    return float(slope)
