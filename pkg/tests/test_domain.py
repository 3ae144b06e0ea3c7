import itertools

import pytest

from nullit import ir
from nullit.domain import (
    NONNULL, NULLABLE, NULLABLE_INIT, RAW_MINUS,
    join, leq, nonnull_refine, raw,
    tval_join, tval_set_def, tval_top,
)

DIAMONDISH = """
class A extends Object {
  ctor (0, 1) { return }
  static main (0, 1) { return }
}
class B extends A {
  ctor (0, 1) {
    load 0
    invokespecial A.<init> 0
    return
  }
}
class C extends A {
  ctor (0, 1) {
    load 0
    invokespecial A.<init> 0
    return
  }
}
class D extends B {
  ctor (0, 1) {
    load 0
    invokespecial B.<init> 0
  return
  }
}
"""


@pytest.fixture(scope="module")
def hier():
    return ir.Hierarchy(ir.parse_program(DIAMONDISH))


def lattice_points(hier):
    pts = [NONNULL, RAW_MINUS, NULLABLE_INIT, NULLABLE]
    pts += [raw(c) for c in hier.class_index]
    return pts


def test_refinement_chain(hier):
    assert leq(NONNULL, NULLABLE_INIT, hier)
    assert leq(NULLABLE_INIT, NULLABLE, hier)
    assert not leq(NULLABLE_INIT, NONNULL, hier)


def test_raw_order_follows_hierarchy(hier):
    assert leq(raw("B"), raw("A"), hier)
    assert not leq(raw("A"), raw("B"), hier)
    assert leq(raw("D"), raw("Object"), hier)
    assert leq(raw("A"), RAW_MINUS, hier)


def test_nullable_init_raw_incomparable(hier):
    assert not leq(NULLABLE_INIT, RAW_MINUS, hier)
    assert not leq(RAW_MINUS, NULLABLE_INIT, hier)
    assert not leq(NULLABLE_INIT, raw("A"), hier)
    assert not leq(raw("A"), NULLABLE_INIT, hier)


def test_top_and_bottom(hier):
    for a in lattice_points(hier):
        assert leq(a, NULLABLE, hier)
        assert leq(NONNULL, a, hier)


def test_join_examples(hier):
    assert join(NONNULL, NULLABLE, hier) == NULLABLE
    assert join(raw("B"), raw("C"), hier) == raw("A")
    assert join(NULLABLE_INIT, RAW_MINUS, hier) == NULLABLE
    assert join(NULLABLE_INIT, raw("D"), hier) == NULLABLE
    assert join(raw("A"), NONNULL, hier) == raw("A")
    assert join(raw("D"), RAW_MINUS, hier) == RAW_MINUS


def test_leq_is_partial_order(hier):
    pts = lattice_points(hier)
    for a in pts:
        assert leq(a, a, hier)
    for a, b in itertools.product(pts, pts):
        if leq(a, b, hier) and leq(b, a, hier):
            assert a == b
    for a, b, c in itertools.product(pts, pts, pts):
        if leq(a, b, hier) and leq(b, c, hier):
            assert leq(a, c, hier)


def test_join_is_least_upper_bound(hier):
    pts = lattice_points(hier)
    for a, b in itertools.product(pts, pts):
        j = join(a, b, hier)
        assert join(b, a, hier) == j
        assert leq(a, j, hier) and leq(b, j, hier)
        for c in pts:
            if leq(a, c, hier) and leq(b, c, hier):
                assert leq(j, c, hier)


def test_refine_reductive_idempotent_monotone(hier):
    pts = lattice_points(hier)
    for a in pts:
        r = nonnull_refine(a)
        assert leq(r, a, hier)
        assert nonnull_refine(r) == r
    for a, b in itertools.product(pts, pts):
        if leq(a, b, hier):
            assert leq(nonnull_refine(a), nonnull_refine(b), hier)


def test_refine_strips_null(hier):
    assert nonnull_refine(NULLABLE) == RAW_MINUS
    assert nonnull_refine(NULLABLE_INIT) == NONNULL
    assert nonnull_refine(raw("A")) == raw("A")
    assert nonnull_refine(NONNULL) == NONNULL


def test_tval_ops():
    top = tval_top(["f", "g"])
    assert top == frozenset({"f", "g"})
    assert tval_set_def(frozenset({"f"}), "f") == frozenset()
    assert tval_join(frozenset(), frozenset({"f"})) == frozenset({"f"})
