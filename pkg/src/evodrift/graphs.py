"""Graph snapshot types and operations.

A snapshot is an undirected simple graph at one time index, with per-node
features and optional labels plus an optional observation mask.  An evolving
graph is a time-ordered sequence of snapshots with monotone node counts.
This module holds validation, row-stochastic normalization, stochastic
augmentation, and the text-based sequence directory format.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, SequenceFormatError

__all__ = [
    "GraphSnapshot",
    "EvolvingGraph",
    "NormalizedAdjacency",
    "AugmentationSpec",
    "InvariantViolation",
    "validate",
    "require_valid",
    "normalize",
    "augment",
    "save_sequence",
    "load_sequence",
    "edges_persist",
    "features_frozen",
    "snapshots_equal",
]

AUGMENTATION_KINDS = ("drop_edge", "drop_node", "mask_feature")


def _canonical_edges(edges) -> np.ndarray:
    """Coerce to an (E, 2) int64 array, orient u < v, sort lexicographically.

    Self-loops and duplicates are preserved (validate reports them)."""
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("edges must be an (E, 2) array of endpoints")
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    order = np.lexsort((hi, lo))
    return np.column_stack((lo[order], hi[order]))


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class GraphSnapshot:
    """One time slice of an evolving graph.

    Edges are stored canonically: endpoints oriented u < v and rows sorted.
    All arrays are read-only after construction.
    """

    n: int
    edges: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None
    mask: np.ndarray | None = None
    time_index: int = 0

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "n", int(self.n))
        set_(self, "time_index", int(self.time_index))
        set_(self, "edges", _frozen(_canonical_edges(self.edges)))
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim == 1:
            feats = feats.reshape(-1, 1) if feats.size else feats.reshape(0, 0)
        set_(self, "features", _frozen(feats))
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if not np.issubdtype(lab.dtype, np.integer):
                lab = lab.astype(np.float64)
            set_(self, "labels", _frozen(lab.reshape(-1)))
        if self.mask is not None:
            set_(self, "mask",
                 _frozen(np.asarray(self.mask, dtype=np.int64).reshape(-1)))
        set_(self, "_cache", {})

    # -- derived structure ------------------------------------------------

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1] if self.features.ndim == 2 else 0

    @property
    def degrees(self) -> np.ndarray:
        cache = self._cache
        if "degrees" not in cache:
            deg = np.bincount(self.edges.reshape(-1), minlength=self.n)
            cache["degrees"] = _frozen(deg.astype(np.int64))
        return cache["degrees"]

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Neighbor lists as (indptr, indices), neighbors sorted per row."""
        cache = self._cache
        if "csr" not in cache:
            cache["csr"] = self._build_csr(with_self=False)
        return cache["csr"]

    def csr_with_self_loops(self) -> tuple[np.ndarray, np.ndarray]:
        """Like :meth:`csr` but every row also contains the node itself."""
        cache = self._cache
        if "csr_self" not in cache:
            cache["csr_self"] = self._build_csr(with_self=True)
        return cache["csr_self"]

    def _build_csr(self, with_self: bool):
        u, v = self.edges[:, 0], self.edges[:, 1]
        heads = np.concatenate([u, v])
        tails = np.concatenate([v, u])
        if with_self:
            loop = np.arange(self.n, dtype=np.int64)
            heads = np.concatenate([heads, loop])
            tails = np.concatenate([tails, loop])
        order = np.lexsort((tails, heads))
        indices = np.ascontiguousarray(tails[order])
        counts = np.bincount(heads, minlength=self.n)
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return _frozen(indptr), _frozen(indices)

    def replace(self, **kw) -> "GraphSnapshot":
        """Functional update; unspecified fields carry over."""
        base = dict(n=self.n, edges=self.edges, features=self.features,
                    labels=self.labels, mask=self.mask,
                    time_index=self.time_index)
        base.update(kw)
        return GraphSnapshot(**base)


@dataclass(frozen=True)
class InvariantViolation:
    kind: str
    detail: str

    def __str__(self):
        return f"{self.kind}: {self.detail}"


def validate(s: GraphSnapshot) -> list[InvariantViolation]:
    """Check every snapshot invariant; returns an empty list when valid."""
    out: list[InvariantViolation] = []
    edges = s.edges
    if edges.size:
        bad = np.flatnonzero((edges < 0).any(axis=1) | (edges >= s.n).any(axis=1))
        if bad.size:
            out.append(InvariantViolation(
                "edge_out_of_range",
                f"edge rows {bad[:5].tolist()} have endpoints outside [0, {s.n})"))
        loops = np.flatnonzero(edges[:, 0] == edges[:, 1])
        if loops.size:
            out.append(InvariantViolation(
                "self_loop", f"edge rows {loops[:5].tolist()} are self-loops"))
        dup = np.flatnonzero((edges[1:] == edges[:-1]).all(axis=1))
        if dup.size:
            out.append(InvariantViolation(
                "duplicate_edge",
                f"duplicated undirected edges at sorted rows {dup[:5].tolist()}"))
    if s.features.shape[0] != s.n:
        out.append(InvariantViolation(
            "feature_row_mismatch",
            f"features have {s.features.shape[0]} rows for {s.n} nodes"))
    if s.features.size and not np.isfinite(s.features).all():
        rows = np.flatnonzero(~np.isfinite(s.features).all(axis=1))
        out.append(InvariantViolation(
            "non_finite_feature",
            f"non-finite feature values in rows {rows[:5].tolist()}"))
    if s.labels is not None and len(s.labels) != s.n:
        out.append(InvariantViolation(
            "label_length_mismatch",
            f"{len(s.labels)} labels for {s.n} nodes"))
    if s.mask is not None and s.mask.size:
        if s.labels is None:
            out.append(InvariantViolation(
                "mask_without_labels",
                "observation mask present but snapshot has no labels"))
        if (s.mask < 0).any() or (s.mask >= s.n).any():
            out.append(InvariantViolation(
                "mask_invalid", f"mask indices outside [0, {s.n})"))
        elif not (np.diff(s.mask) > 0).all():
            out.append(InvariantViolation(
                "mask_invalid", "mask indices must be strictly increasing"))
    return out


def require_valid(s: GraphSnapshot) -> GraphSnapshot:
    violations = validate(s)
    if violations:
        raise ValueError("invalid snapshot: "
                         + "; ".join(str(v) for v in violations))
    return s


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Row-stochastic self-looped adjacency D^-1 (A + I) as sparse CSR."""

    matrix: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dot(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def __matmul__(self, x):
        return self.matrix @ x


def normalize(s: GraphSnapshot) -> NormalizedAdjacency:
    """Row-normalize the self-looped adjacency of a valid snapshot.

    Entry (i, j) equals 1 / (deg(i) + 1) wherever A + I has support, so each
    row sums to one.
    """
    indptr, indices = s.csr_with_self_loops()
    inv = 1.0 / (s.degrees + 1.0)
    data = np.repeat(inv, np.diff(indptr))
    mat = sp.csr_matrix((data, indices.copy(), indptr.copy()), shape=(s.n, s.n))
    return NormalizedAdjacency(mat)


@dataclass(frozen=True)
class AugmentationSpec:
    """A stochastic graph corruption: kind plus a Bernoulli probability."""

    kind: str
    p: float

    def __post_init__(self):
        if self.kind not in AUGMENTATION_KINDS:
            raise ConfigError(
                f"unknown augmentation kind {self.kind!r}; "
                f"expected one of {AUGMENTATION_KINDS}")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"augmentation probability {self.p} not in [0, 1]")


def augment(s: GraphSnapshot, spec: AugmentationSpec, rng) -> GraphSnapshot:
    """Apply one stochastic corruption, consuming draws from ``rng``.

    drop_edge removes each edge independently with probability p; drop_node
    removes all edges incident to each sampled node (rows remain); and
    mask_feature zeroes each sampled node's feature row.
    """
    if spec.kind == "drop_edge":
        keep = rng.random(s.edge_count) >= spec.p
        return s.replace(edges=s.edges[keep])
    if spec.kind == "drop_node":
        dropped = rng.random(s.n) < spec.p
        if s.edge_count == 0:
            return s.replace()
        keep = ~(dropped[s.edges[:, 0]] | dropped[s.edges[:, 1]])
        return s.replace(edges=s.edges[keep])
    masked = rng.random(s.n) < spec.p
    feats = s.features.copy()
    feats[masked] = 0.0
    return s.replace(features=feats)


@dataclass(frozen=True, eq=False)
class EvolvingGraph:
    """Time-ordered snapshots with monotone node counts and one feature dim."""

    snapshots: tuple[GraphSnapshot, ...]

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        if not self.snapshots:
            raise ValueError("an evolving graph needs at least one snapshot")
        ns = [s.n for s in self.snapshots]
        if any(b < a for a, b in zip(ns, ns[1:])):
            raise ValueError(f"node counts must be non-decreasing, got {ns}")
        dims = {s.feature_dim for s in self.snapshots}
        if len(dims) > 1:
            raise ValueError(f"snapshots disagree on feature dim: {sorted(dims)}")
        times = [s.time_index for s in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot time indices must strictly increase")

    @property
    def feature_dim(self) -> int:
        return self.snapshots[0].feature_dim

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, k) -> GraphSnapshot:
        return self.snapshots[k]


def _edge_view(edges: np.ndarray) -> np.ndarray:
    flat = np.ascontiguousarray(edges).view([("u", np.int64), ("v", np.int64)])
    return flat.reshape(-1)


def edges_persist(g: EvolvingGraph) -> bool:
    """True when every snapshot's edge set is contained in its successor's."""
    for a, b in zip(g.snapshots, g.snapshots[1:]):
        if a.edge_count == 0:
            continue
        if not np.isin(_edge_view(a.edges), _edge_view(b.edges)).all():
            return False
    return True


def features_frozen(g: EvolvingGraph) -> bool:
    """True when feature rows never change after a node arrives."""
    for a, b in zip(g.snapshots, g.snapshots[1:]):
        if not np.array_equal(a.features, b.features[: a.n]):
            return False
    return True


def snapshots_equal(a: GraphSnapshot, b: GraphSnapshot,
                    feat_tol: float = 0.0) -> bool:
    """Structural equality; features compared within ``feat_tol``."""
    if (a.n != b.n or a.time_index != b.time_index
            or not np.array_equal(a.edges, b.edges)):
        return False
    if a.features.shape != b.features.shape:
        return False
    if feat_tol == 0.0:
        if not np.array_equal(a.features, b.features):
            return False
    elif not np.allclose(a.features, b.features, rtol=0.0, atol=feat_tol):
        return False
    if (a.labels is None) != (b.labels is None):
        return False
    if a.labels is not None and not np.array_equal(
            a.labels, b.labels, equal_nan=True):
        return False
    ma = a.mask if a.mask is not None and a.mask.size else None
    mb = b.mask if b.mask is not None and b.mask.size else None
    if (ma is None) != (mb is None):
        return False
    return ma is None or np.array_equal(ma, mb)


# -- sequence directory format -------------------------------------------
#
# t{k}.edges   first line "n=<count>", then one "u v" per line, u < v, sorted
# t{k}.feat    CSV, one row per node, 17-significant-digit decimals
# t{k}.labels  optional, one value per line (ints for classification)
# t{k}.mask    optional, sorted node indices, one per line

_EDGE_HEADER = re.compile(r"^n=(\d+)$")


def _format_float(x: float) -> str:
    return repr(float(x))


def save_sequence(g: EvolvingGraph, dirpath: str | os.PathLike) -> None:
    """Write the sequence into a directory, one file group per snapshot."""
    dirpath = os.fspath(dirpath)
    os.makedirs(dirpath, exist_ok=True)
    for k, s in enumerate(g.snapshots):
        with open(os.path.join(dirpath, f"t{k}.edges"), "w") as fh:
            fh.write(f"n={s.n}\n")
            for u, v in s.edges:
                fh.write(f"{u} {v}\n")
        with open(os.path.join(dirpath, f"t{k}.feat"), "w") as fh:
            for row in s.features:
                fh.write(",".join(_format_float(x) for x in row))
                fh.write("\n")
        lab_path = os.path.join(dirpath, f"t{k}.labels")
        if s.labels is not None:
            integral = np.issubdtype(s.labels.dtype, np.integer)
            with open(lab_path, "w") as fh:
                for y in s.labels:
                    fh.write(str(int(y)) if integral else _format_float(y))
                    fh.write("\n")
        elif os.path.exists(lab_path):
            os.remove(lab_path)
        mask_path = os.path.join(dirpath, f"t{k}.mask")
        if s.mask is not None and s.mask.size:
            with open(mask_path, "w") as fh:
                for i in s.mask:
                    fh.write(f"{i}\n")
        elif os.path.exists(mask_path):
            os.remove(mask_path)
    # Drop stale higher-indexed files from any previous, longer save.
    k = len(g.snapshots)
    while any(os.path.exists(os.path.join(dirpath, f"t{k}{ext}"))
              for ext in (".edges", ".feat", ".labels", ".mask")):
        for ext in (".edges", ".feat", ".labels", ".mask"):
            path = os.path.join(dirpath, f"t{k}{ext}")
            if os.path.exists(path):
                os.remove(path)
        k += 1


def _read_lines(path: str) -> list[str]:
    with open(path) as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _parse_edges(path: str) -> tuple[int, np.ndarray]:
    lines = _read_lines(path)
    if not lines:
        raise SequenceFormatError("missing n= header", path=path, line=1)
    m = _EDGE_HEADER.match(lines[0])
    if m is None:
        raise SequenceFormatError(
            f"expected 'n=<count>' header, got {lines[0]!r}", path=path, line=1)
    n = int(m.group(1))
    edges = np.zeros((len(lines) - 1, 2), dtype=np.int64)
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 2:
            raise SequenceFormatError(
                f"expected 'u v', got {line!r}", path=path, line=i)
        try:
            edges[i - 2] = (int(parts[0]), int(parts[1]))
        except ValueError:
            raise SequenceFormatError(
                f"non-integer endpoint in {line!r}", path=path, line=i)
    return n, edges


def _parse_features(path: str, n: int) -> np.ndarray:
    lines = _read_lines(path)
    if len(lines) != n:
        raise SequenceFormatError(
            f"expected {n} feature rows, found {len(lines)}", path=path,
            line=len(lines) + 1)
    rows = []
    width = None
    for i, line in enumerate(lines, start=1):
        fields = line.split(",") if line else []
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise SequenceFormatError(
                f"row has {len(fields)} columns, expected {width}",
                path=path, line=i)
        try:
            rows.append([float(x) for x in fields])
        except ValueError:
            raise SequenceFormatError(
                f"non-numeric feature value in {line!r}", path=path, line=i)
    if n == 0:
        return np.zeros((0, 0))
    return np.asarray(rows, dtype=np.float64).reshape(n, width or 0)


_INT_LINE = re.compile(r"^[+-]?\d+$")


def _parse_labels(path: str) -> np.ndarray:
    lines = _read_lines(path)
    if all(_INT_LINE.match(line) for line in lines) and lines:
        return np.array([int(x) for x in lines], dtype=np.int64)
    vals = []
    for i, line in enumerate(lines, start=1):
        try:
            vals.append(float(line))
        except ValueError:
            raise SequenceFormatError(
                f"non-numeric label {line!r}", path=path, line=i)
    return np.array(vals, dtype=np.float64)


def _parse_mask(path: str) -> np.ndarray:
    lines = _read_lines(path)
    for i, line in enumerate(lines, start=1):
        if not _INT_LINE.match(line):
            raise SequenceFormatError(
                f"non-integer mask index {line!r}", path=path, line=i)
    return np.array([int(x) for x in lines], dtype=np.int64)


def load_sequence(dirpath: str | os.PathLike,
                  with_labels: bool = True) -> EvolvingGraph:
    """Load a sequence directory written by :func:`save_sequence`.

    ``with_labels=False`` skips label and mask files entirely (the harness
    uses this so post-deployment labels are only ever opened through its
    audited access path).
    """
    dirpath = os.fspath(dirpath)
    first = os.path.join(dirpath, "t0.edges")
    if not os.path.exists(first):
        raise FileNotFoundError(f"sequence directory has no t0.edges: {dirpath}")
    snaps = []
    k = 0
    width = None
    while os.path.exists(os.path.join(dirpath, f"t{k}.edges")):
        n, edges = _parse_edges(os.path.join(dirpath, f"t{k}.edges"))
        feat_path = os.path.join(dirpath, f"t{k}.feat")
        if not os.path.exists(feat_path):
            raise FileNotFoundError(f"missing feature file: {feat_path}")
        feats = _parse_features(feat_path, n)
        if width is None:
            width = feats.shape[1]
        elif feats.shape[1] != width:
            raise SequenceFormatError(
                f"feature dimension changed from {width} to {feats.shape[1]} "
                f"at t{k}", path=feat_path)
        labels = mask = None
        if with_labels:
            lab_path = os.path.join(dirpath, f"t{k}.labels")
            if os.path.exists(lab_path):
                labels = _parse_labels(lab_path)
            mask_path = os.path.join(dirpath, f"t{k}.mask")
            if os.path.exists(mask_path):
                mask = _parse_mask(mask_path)
        snaps.append(GraphSnapshot(n=n, edges=edges, features=feats,
                                   labels=labels, mask=mask, time_index=k))
        k += 1
    try:
        return EvolvingGraph(tuple(snaps))
    except ValueError as exc:
        raise SequenceFormatError(str(exc), path=dirpath)
