"""Shared fixture builders for the test suite."""

import numpy as np
import pytest

from evodrift.graphs import EvolvingGraph, GraphSnapshot
from evodrift.rng import RngStream


def build_sequence(frames) -> EvolvingGraph:
    """EvolvingGraph from (n, edges, features) triples with time 0, 1, ..."""
    snaps = [GraphSnapshot(n=n, edges=np.asarray(e, dtype=np.int64),
                           features=np.asarray(f, dtype=np.float64),
                           time_index=k)
             for k, (n, e, f) in enumerate(frames)]
    return EvolvingGraph(snapshots=tuple(snaps))


def star_growth(extra: int, dim: int = 2, seed: int = 7) -> EvolvingGraph:
    """Triangle seed where node 0 gains one fresh neighbor per step.

    Node 0 has degree 2 at time 0 and degree 2 + tau at time tau; every
    other node keeps its initial degree.  Features are drawn once and
    frozen, so prefix rows agree across snapshots.
    """
    rng = RngStream(seed, "star-growth")
    feats = rng.normal(size=(3 + extra, dim))
    edges = [(0, 1), (0, 2), (1, 2)]
    frames = [(3, list(edges), feats[:3])]
    for k in range(extra):
        new = 3 + k
        edges = edges + [(0, new)]
        frames.append((new + 1, list(edges), feats[: new + 1]))
    return build_sequence(frames)


@pytest.fixture
def rng_root():
    return RngStream(20260815, "tests")
