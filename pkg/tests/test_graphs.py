"""Tests for snapshot invariants, normalization, augmentation, and the
sequence directory format."""

import os

import numpy as np
import pytest

from conftest import build_sequence, star_growth
from oracles import dense_normalized_adjacency
from evodrift.errors import ConfigError, SequenceFormatError
from evodrift.graphs import (
    AugmentationSpec,
    EvolvingGraph,
    GraphSnapshot,
    augment,
    edges_persist,
    features_frozen,
    load_sequence,
    normalize,
    require_valid,
    save_sequence,
    snapshots_equal,
    validate,
)
from evodrift.rng import RngStream


def path3(**kw):
    return GraphSnapshot(n=3, edges=[(0, 1), (1, 2)],
                         features=np.eye(3), **kw)


def random_snapshot(rng, n=30, density=0.15):
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    keep = rng.random(len(pairs)) < density
    edges = [p for p, k in zip(pairs, keep) if k]
    feats = rng.normal(size=(n, 4))
    return GraphSnapshot(n=n, edges=edges, features=feats)


# -- construction ----------------------------------------------------------

def test_edges_are_canonicalized():
    s = GraphSnapshot(n=4, edges=[(3, 1), (2, 0), (1, 0)],
                      features=np.zeros((4, 1)))
    assert s.edges.tolist() == [[0, 1], [0, 2], [1, 3]]


def test_arrays_are_read_only():
    s = path3()
    with pytest.raises(ValueError):
        s.edges[0, 0] = 9
    with pytest.raises(ValueError):
        s.features[0, 0] = 9.0


def test_replace_carries_unspecified_fields():
    s = path3(labels=np.array([1.0, 2.0, 3.0]), time_index=5)
    t = s.replace(features=np.ones((3, 2)))
    assert t.time_index == 5
    assert np.array_equal(t.labels, s.labels)
    assert np.array_equal(t.edges, s.edges)
    assert t.feature_dim == 2


def test_degrees_and_csr_hand_values():
    s = path3()
    assert s.degrees.tolist() == [1, 2, 1]
    indptr, indices = s.csr()
    assert indptr.tolist() == [0, 1, 3, 4]
    assert indices.tolist() == [1, 0, 2, 1]
    indptr2, indices2 = s.csr_with_self_loops()
    assert indptr2.tolist() == [0, 2, 5, 7]
    assert indices2.tolist() == [0, 1, 0, 1, 2, 1, 2]


# -- validation ------------------------------------------------------------

def test_validate_clean_snapshot():
    assert validate(path3()) == []


def kinds(s):
    return [v.kind for v in validate(s)]


def test_validate_edge_out_of_range():
    s = GraphSnapshot(n=3, edges=[(0, 5)], features=np.zeros((3, 1)))
    assert kinds(s) == ["edge_out_of_range"]


def test_validate_self_loop():
    s = GraphSnapshot(n=3, edges=[(0, 1), (2, 2)], features=np.zeros((3, 1)))
    assert kinds(s) == ["self_loop"]


def test_validate_duplicate_after_orientation():
    s = GraphSnapshot(n=3, edges=[(0, 1), (1, 0)], features=np.zeros((3, 1)))
    assert kinds(s) == ["duplicate_edge"]


def test_validate_feature_row_mismatch():
    s = GraphSnapshot(n=3, edges=[(0, 1)], features=np.zeros((2, 1)))
    assert kinds(s) == ["feature_row_mismatch"]


def test_validate_non_finite_feature():
    feats = np.zeros((3, 2))
    feats[1, 0] = np.nan
    s = GraphSnapshot(n=3, edges=[(0, 1)], features=feats)
    assert kinds(s) == ["non_finite_feature"]


def test_validate_label_length_mismatch():
    s = path3(labels=np.array([1.0, 2.0]))
    assert kinds(s) == ["label_length_mismatch"]


def test_validate_mask_without_labels():
    s = path3(mask=np.array([0, 1]))
    assert kinds(s) == ["mask_without_labels"]


def test_validate_mask_out_of_range():
    s = path3(labels=np.zeros(3), mask=np.array([0, 7]))
    assert kinds(s) == ["mask_invalid"]


def test_validate_mask_must_increase():
    s = path3(labels=np.zeros(3), mask=np.array([1, 1]))
    assert kinds(s) == ["mask_invalid"]


def test_require_valid_raises_with_kind_in_message():
    s = GraphSnapshot(n=2, edges=[(1, 1)], features=np.zeros((2, 1)))
    with pytest.raises(ValueError, match="self_loop"):
        require_valid(s)
    assert require_valid(path3()) is not None


# -- normalization ---------------------------------------------------------

def test_normalize_path_row_hand_value():
    l = normalize(path3())
    dense = l.matrix.toarray()
    assert np.allclose(dense[0], [0.5, 0.5, 0.0])
    assert np.allclose(dense[1], [1 / 3, 1 / 3, 1 / 3])


def test_normalize_triangle_uniform_rows():
    s = GraphSnapshot(n=3, edges=[(0, 1), (1, 2), (0, 2)],
                      features=np.zeros((3, 1)))
    dense = normalize(s).matrix.toarray()
    assert np.allclose(dense, np.full((3, 3), 1 / 3))


def test_normalize_single_node():
    s = GraphSnapshot(n=1, edges=[], features=np.zeros((1, 1)))
    assert normalize(s).matrix.toarray().tolist() == [[1.0]]


def test_normalize_rows_sum_to_one_on_random_graphs():
    root = RngStream(101, "rows")
    for trial in range(5):
        s = random_snapshot(root.child(f"t{trial}"))
        sums = np.asarray(normalize(s).matrix.sum(axis=1)).ravel()
        assert np.abs(sums - 1.0).max() < 1e-9


def test_normalize_matches_dense_oracle():
    root = RngStream(202, "dense")
    for trial in range(3):
        s = random_snapshot(root.child(f"t{trial}"), n=20)
        got = normalize(s).matrix.toarray()
        want = dense_normalized_adjacency(s.n, [tuple(e) for e in s.edges])
        assert np.allclose(got, want, atol=1e-12)


def test_normalized_adjacency_dot_and_matmul_agree():
    s = random_snapshot(RngStream(7, "dot"), n=12)
    l = normalize(s)
    x = RngStream(8, "vec").normal(size=(12, 3))
    assert np.allclose(l.dot(x), l @ x)
    assert l.n == 12


# -- augmentation ----------------------------------------------------------

def test_augmentation_spec_rejects_unknown_kind():
    with pytest.raises(ConfigError):
        AugmentationSpec(kind="add_edge", p=0.5)


@pytest.mark.parametrize("p", [-0.1, 1.5])
def test_augmentation_spec_rejects_bad_probability(p):
    with pytest.raises(ConfigError):
        AugmentationSpec(kind="drop_edge", p=p)


@pytest.mark.parametrize("kind", ["drop_edge", "drop_node", "mask_feature"])
def test_augment_probability_zero_is_identity(kind):
    s = random_snapshot(RngStream(31, "ident"), n=15)
    out = augment(s, AugmentationSpec(kind=kind, p=0.0), RngStream(32, "aug"))
    assert snapshots_equal(out, s)


def test_drop_edge_probability_one_empties_edges():
    s = path3()
    out = augment(s, AugmentationSpec("drop_edge", 1.0), RngStream(1, "a"))
    assert out.edge_count == 0
    assert out.n == 3


def test_drop_node_probability_one_keeps_rows_drops_edges():
    s = random_snapshot(RngStream(33, "dn"), n=15)
    out = augment(s, AugmentationSpec("drop_node", 1.0), RngStream(2, "a"))
    assert out.edge_count == 0
    assert out.n == s.n
    assert np.array_equal(out.features, s.features)


def test_mask_feature_probability_one_zeroes_everything():
    s = random_snapshot(RngStream(34, "mf"), n=10)
    out = augment(s, AugmentationSpec("mask_feature", 1.0), RngStream(3, "a"))
    assert np.array_equal(out.features, np.zeros_like(s.features))
    assert np.array_equal(out.edges, s.edges)


def test_mask_feature_rows_all_or_nothing():
    s = random_snapshot(RngStream(35, "rows"), n=40)
    out = augment(s, AugmentationSpec("mask_feature", 0.5), RngStream(4, "a"))
    for i in range(s.n):
        row = out.features[i]
        assert np.array_equal(row, s.features[i]) or not row.any()


def test_drop_node_removes_exactly_incident_edges():
    s = random_snapshot(RngStream(36, "inc"), n=25)
    out = augment(s, AugmentationSpec("drop_node", 0.4), RngStream(5, "a"))
    # Replaying the stream recovers the sampled node set, so we can check
    # the removal rule edge-for-edge: gone iff an endpoint was dropped.
    dropped = RngStream(5, "a").random(s.n) < 0.4
    survivors = set(map(tuple, out.edges.tolist()))
    for u, v in s.edges.tolist():
        if dropped[u] or dropped[v]:
            assert (u, v) not in survivors
        else:
            assert (u, v) in survivors
    assert 0 < out.edge_count < s.edge_count
    assert out.n == s.n
    assert np.array_equal(out.features, s.features)


def test_augment_deterministic_per_stream():
    s = random_snapshot(RngStream(37, "det"), n=20)
    spec = AugmentationSpec("drop_edge", 0.4)
    a = augment(s, spec, RngStream(9, "same"))
    b = augment(s, spec, RngStream(9, "same"))
    c = augment(s, spec, RngStream(10, "other"))
    assert snapshots_equal(a, b)
    assert not np.array_equal(a.edges, c.edges)


def test_drop_edge_keep_fraction_concentrates():
    # Path on 10001 nodes gives exactly 10000 edges; each survives with
    # probability 0.7, so the 50-seed mean kept fraction has standard error
    # sqrt(0.21 / 500000) < 7e-4 and 0.02 is a very wide margin.
    n_edges = 10000
    edges = [(i, i + 1) for i in range(n_edges)]
    s = GraphSnapshot(n=n_edges + 1, edges=edges,
                      features=np.zeros((n_edges + 1, 0)))
    spec = AugmentationSpec("drop_edge", 0.3)
    fractions = []
    for seed in range(50):
        out = augment(s, spec, RngStream(seed, "mc"))
        fractions.append(out.edge_count / n_edges)
    assert abs(np.mean(fractions) - 0.70) < 0.02


# -- evolving-graph invariants ---------------------------------------------

def test_evolving_graph_rejects_shrinking_node_count():
    a = path3()
    b = GraphSnapshot(n=2, edges=[(0, 1)], features=np.eye(2), time_index=1)
    with pytest.raises(ValueError, match="non-decreasing"):
        EvolvingGraph((a, b))


def test_evolving_graph_rejects_feature_dim_change():
    a = path3()
    b = GraphSnapshot(n=3, edges=[(0, 1)], features=np.zeros((3, 5)),
                      time_index=1)
    with pytest.raises(ValueError, match="feature dim"):
        EvolvingGraph((a, b))


def test_evolving_graph_rejects_non_increasing_time():
    a = path3(time_index=2)
    b = path3(time_index=2)
    with pytest.raises(ValueError, match="strictly increase"):
        EvolvingGraph((a, b))


def test_evolving_graph_len_and_indexing():
    g = star_growth(3)
    assert len(g) == 4
    assert g[0].n < g[-1].n
    assert [s.time_index for s in g.snapshots] == [0, 1, 2, 3]


def test_edges_persist_and_features_frozen_on_star_growth():
    g = star_growth(4)
    assert edges_persist(g)
    assert features_frozen(g)


def test_edges_persist_detects_removal():
    a = path3()
    b = GraphSnapshot(n=3, edges=[(0, 1)], features=np.eye(3), time_index=1)
    assert not edges_persist(EvolvingGraph((a, b)))


def test_features_frozen_detects_rewritten_row():
    a = path3()
    feats = np.eye(3)
    feats[0, 0] = 5.0
    b = GraphSnapshot(n=3, edges=[(0, 1), (1, 2)], features=feats,
                      time_index=1)
    assert not features_frozen(EvolvingGraph((a, b)))


def test_snapshots_equal_feature_tolerance():
    a = path3()
    b = a.replace(features=a.features + 1e-13)
    assert not snapshots_equal(a, b)
    assert snapshots_equal(a, b, feat_tol=1e-12)


def test_snapshots_equal_checks_labels_and_mask():
    a = path3(labels=np.array([1.0, np.nan, 3.0]), mask=np.array([0, 2]))
    b = path3(labels=np.array([1.0, np.nan, 3.0]), mask=np.array([0, 2]))
    assert snapshots_equal(a, b)
    assert not snapshots_equal(a, path3())
    assert not snapshots_equal(a, a.replace(mask=np.array([0, 1])))


# -- sequence directory format ----------------------------------------------

def labeled_sequence():
    rng = RngStream(55, "seq")
    frames = []
    for k, n in enumerate((4, 5, 6)):
        edges = [(i, i + 1) for i in range(n - 1)]
        feats = rng.child(f"f{k}").normal(size=(n, 3))
        labels = rng.child(f"y{k}").normal(size=n)
        frames.append(GraphSnapshot(n=n, edges=edges, features=feats,
                                    labels=labels, mask=np.array([0, n - 1]),
                                    time_index=k))
    return EvolvingGraph(tuple(frames))


def test_save_load_round_trip_exact(tmp_path):
    g = labeled_sequence()
    save_sequence(g, tmp_path)
    back = load_sequence(tmp_path)
    assert len(back) == len(g)
    for a, b in zip(g.snapshots, back.snapshots):
        assert snapshots_equal(a, b, feat_tol=1e-12)
        assert np.array_equal(a.edges, b.edges)
        assert np.array_equal(a.mask, b.mask)
        assert np.allclose(a.labels, b.labels, atol=0, rtol=0)


def test_save_load_integer_labels_stay_integral(tmp_path):
    s = path3(labels=np.array([0, 2, 1], dtype=np.int64),
              mask=np.array([1]))
    save_sequence(EvolvingGraph((s,)), tmp_path)
    back = load_sequence(tmp_path)[0]
    assert np.issubdtype(back.labels.dtype, np.integer)
    assert back.labels.tolist() == [0, 2, 1]


def test_load_without_labels_skips_label_and_mask_files(tmp_path):
    save_sequence(labeled_sequence(), tmp_path)
    back = load_sequence(tmp_path, with_labels=False)
    assert all(s.labels is None and s.mask is None for s in back.snapshots)


def test_save_removes_stale_higher_frames(tmp_path):
    save_sequence(labeled_sequence(), tmp_path)
    short = EvolvingGraph(labeled_sequence().snapshots[:1])
    save_sequence(short, tmp_path)
    assert len(load_sequence(tmp_path)) == 1
    assert not os.path.exists(tmp_path / "t1.edges")
    assert not os.path.exists(tmp_path / "t2.labels")


def test_round_trip_zero_width_features(tmp_path):
    g = build_sequence([(3, [(0, 1), (1, 2)], np.zeros((3, 0)))])
    save_sequence(g, tmp_path)
    back = load_sequence(tmp_path)
    assert back[0].feature_dim == 0
    assert back[0].n == 3


def test_load_missing_directory_reports_t0(tmp_path):
    with pytest.raises(FileNotFoundError, match="t0.edges"):
        load_sequence(tmp_path / "nowhere")


def test_load_missing_feature_file(tmp_path):
    (tmp_path / "t0.edges").write_text("n=2\n0 1\n")
    with pytest.raises(FileNotFoundError, match="t0.feat"):
        load_sequence(tmp_path)


def test_load_bad_header_reports_line_one(tmp_path):
    (tmp_path / "t0.edges").write_text("nodes=2\n0 1\n")
    (tmp_path / "t0.feat").write_text("0.0\n0.0\n")
    with pytest.raises(SequenceFormatError) as err:
        load_sequence(tmp_path)
    assert err.value.line == 1
    assert "t0.edges" in str(err.value.path)


def test_load_bad_edge_line_reports_position(tmp_path):
    (tmp_path / "t0.edges").write_text("n=3\n0 1\n0 1 2\n")
    (tmp_path / "t0.feat").write_text("0.0\n0.0\n0.0\n")
    with pytest.raises(SequenceFormatError) as err:
        load_sequence(tmp_path)
    assert err.value.line == 3


def test_load_non_integer_endpoint(tmp_path):
    (tmp_path / "t0.edges").write_text("n=2\n0 x\n")
    (tmp_path / "t0.feat").write_text("0.0\n0.0\n")
    with pytest.raises(SequenceFormatError, match="non-integer"):
        load_sequence(tmp_path)


def test_load_wrong_feature_row_count(tmp_path):
    (tmp_path / "t0.edges").write_text("n=3\n0 1\n")
    (tmp_path / "t0.feat").write_text("0.0\n0.0\n")
    with pytest.raises(SequenceFormatError, match="feature rows"):
        load_sequence(tmp_path)


def test_load_ragged_feature_columns(tmp_path):
    (tmp_path / "t0.edges").write_text("n=2\n0 1\n")
    (tmp_path / "t0.feat").write_text("0.0,1.0\n0.0\n")
    with pytest.raises(SequenceFormatError) as err:
        load_sequence(tmp_path)
    assert err.value.line == 2


def test_load_feature_dim_change_across_frames(tmp_path):
    (tmp_path / "t0.edges").write_text("n=2\n0 1\n")
    (tmp_path / "t0.feat").write_text("0.0\n0.0\n")
    (tmp_path / "t1.edges").write_text("n=2\n0 1\n")
    (tmp_path / "t1.feat").write_text("0.0,1.0\n0.0,1.0\n")
    with pytest.raises(SequenceFormatError, match="dimension changed"):
        load_sequence(tmp_path)


def test_load_non_numeric_label(tmp_path):
    (tmp_path / "t0.edges").write_text("n=2\n0 1\n")
    (tmp_path / "t0.feat").write_text("0.0\n0.0\n")
    (tmp_path / "t0.labels").write_text("1.5\nbad\n")
    with pytest.raises(SequenceFormatError, match="non-numeric label"):
        load_sequence(tmp_path)


def test_load_non_integer_mask(tmp_path):
    (tmp_path / "t0.edges").write_text("n=2\n0 1\n")
    (tmp_path / "t0.feat").write_text("0.0\n0.0\n")
    (tmp_path / "t0.labels").write_text("1\n0\n")
    (tmp_path / "t0.mask").write_text("0.5\n")
    with pytest.raises(SequenceFormatError, match="mask index"):
        load_sequence(tmp_path)


def test_edge_file_format_is_headed_and_sorted(tmp_path):
    save_sequence(labeled_sequence(), tmp_path)
    lines = (tmp_path / "t0.edges").read_text().splitlines()
    assert lines[0] == "n=4"
    pairs = [tuple(map(int, line.split())) for line in lines[1:]]
    assert all(u < v for u, v in pairs)
    assert pairs == sorted(pairs)
