"""Tests for the named, splittable random streams."""

import numpy as np
import pytest

from evodrift.rng import RngStream


def test_same_seed_and_label_reproduce_draws():
    a = RngStream(99, "x").random(10)
    b = RngStream(99, "x").random(10)
    assert np.array_equal(a, b)


def test_different_labels_give_different_draws():
    a = RngStream(99, "x").random(10)
    b = RngStream(99, "y").random(10)
    assert not np.array_equal(a, b)


def test_different_seeds_give_different_draws():
    a = RngStream(1, "x").random(10)
    b = RngStream(2, "x").random(10)
    assert not np.array_equal(a, b)


def test_child_is_equivalent_to_slash_label():
    via_child = RngStream(7, "a").child("b").normal(size=6)
    direct = RngStream(7, "a/b").normal(size=6)
    assert np.array_equal(via_child, direct)


def test_children_are_insensitive_to_parent_consumption():
    parent = RngStream(5, "p")
    before = parent.child("k").random(4)
    parent.random(100)
    after = parent.child("k").random(4)
    assert np.array_equal(before, after)


def test_sibling_order_does_not_matter():
    p1 = RngStream(5, "p")
    a1 = p1.child("a").random(3)
    b1 = p1.child("b").random(3)
    p2 = RngStream(5, "p")
    b2 = p2.child("b").random(3)
    a2 = p2.child("a").random(3)
    assert np.array_equal(a1, a2)
    assert np.array_equal(b1, b2)


def test_nested_children_extend_the_label_path():
    s = RngStream(3, "root").child("e1").child("frame2")
    assert s.label == "root/e1/frame2"
    assert s.seed == 3


def test_golden_values_are_platform_stable():
    # Frozen outputs of the counter-based generator; a change here means
    # previously published runs are no longer reproducible.
    assert np.allclose(
        RngStream(12345, "golden").random(3),
        [0.9008168907634139, 0.3844776551245712, 0.7825558934506696],
        rtol=0, atol=0)
    assert RngStream(12345, "golden").integers(0, 1000, size=5).tolist() == \
        [513, 900, 802, 384, 662]
    assert np.allclose(
        RngStream(0, "root/sub").normal(size=2),
        [-1.655141648727249, -0.7574614637433571],
        rtol=0, atol=0)


def test_seed_must_fit_in_unsigned_64_bits():
    with pytest.raises(ValueError):
        RngStream(-1, "x")
    with pytest.raises(ValueError):
        RngStream(2 ** 64, "x")
    assert RngStream(2 ** 64 - 1, "x").random() is not None


def test_choice_without_replacement_contract():
    s = RngStream(8, "pick")
    got = s.choice_without_replacement(20, 6)
    assert len(got) == 6
    assert len(set(got.tolist())) == 6
    assert got.tolist() == sorted(got.tolist())
    assert got.min() >= 0 and got.max() < 20
    assert RngStream(8, "pick").choice_without_replacement(5, 5).tolist() == \
        [0, 1, 2, 3, 4]
    assert len(RngStream(8, "pick").choice_without_replacement(5, 0)) == 0


def test_choice_without_replacement_rejects_oversample():
    with pytest.raises(ValueError):
        RngStream(8, "pick").choice_without_replacement(3, 4)


def test_permutation_is_a_permutation():
    perm = RngStream(9, "perm").permutation(50)
    assert sorted(perm.tolist()) == list(range(50))
    again = RngStream(9, "perm").permutation(50)
    assert np.array_equal(perm, again)


def test_uniform_and_integer_ranges():
    s = RngStream(10, "ranges")
    u = s.uniform(-2.0, 3.0, size=1000)
    assert u.min() >= -2.0 and u.max() < 3.0
    i = s.integers(5, 9, size=1000)
    assert i.min() >= 5 and i.max() < 9


def test_repr_shows_seed_and_label():
    text = repr(RngStream(4, "trace/sub"))
    assert "4" in text and "trace/sub" in text
