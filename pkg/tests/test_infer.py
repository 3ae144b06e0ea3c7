import pytest

from nullit import infer, ir
from nullit.domain import (
    NONNULL, NULLABLE, NULLABLE_INIT, RAW_MINUS, raw,
)


def _load(name):
    with open(f"corpus/{name}.nir") as fh:
        return ir.parse_program(fh.read())


def _solve(src_or_name, cfg=infer.OPT):
    if "\n" in src_or_name or "{" in src_or_name:
        p = ir.parse_program(src_or_name)
    else:
        p = _load(src_or_name)
    return infer.solve(p, cfg)


# --- motivating programs ---------------------------------------------------

def test_fully_initializing_class():
    for cfg in (infer.BASIC, infer.OPT):
        sol = _solve("fullinit", cfg)
        ann = infer.derive_annotations(sol)
        assert ann.fields["C.f"] == NONNULL
        assert ann.returns[("C", "m", 1)] == NONNULL
        assert ann.params[("C", "m", 1)][0] == NONNULL


def test_escaping_constructor_class():
    for cfg in (infer.BASIC, infer.OPT):
        sol = _solve("escape", cfg)
        ann = infer.derive_annotations(sol)
        assert ann.fields["C.f"] == NONNULL
        assert ann.params[("C", "m", 1)][0] == raw("Object")
        assert ann.returns[("C", "m", 1)] == NULLABLE


# --- null-test refinement --------------------------------------------------

REFINE_SRC = """
class A extends Object {
  static main (0, 2) {
    aconst_null
    store 1
    load 1
    ifnull L
    nop
  L:
    return
  }
}
"""

MAIN = ("A", "main", 0)


def test_ifnull_fallthrough_refines_nullable():
    cfg = infer.AnalysisConfig(test_recovery=True)
    sol = _solve(REFINE_SRC, cfg)
    assert sol.local_at((MAIN, 4), 1) == RAW_MINUS   # the nop
    assert sol.local_at((MAIN, 5), 1) == NULLABLE    # merge at the label


def test_ifnull_fallthrough_refines_null_or_initialized():
    cfg = infer.AnalysisConfig(nullable_init=True, test_recovery=True)
    sol = _solve(REFINE_SRC, cfg)
    assert sol.local_at((MAIN, 3), 1) == NULLABLE_INIT
    assert sol.local_at((MAIN, 4), 1) == NONNULL


def test_no_refinement_when_disabled():
    sol = _solve(REFINE_SRC, infer.BASIC)
    assert sol.local_at((MAIN, 4), 1) == NULLABLE


def test_instanceof_refinement_only_with_flag():
    src = """
class A extends Object {
  field f ref
  ctor (0, 1) { return }
  static main (0, 2) {
    aconst_null
    store 1
    load 1
    instanceof A
    ifeq L
    nop
  L:
    return
  }
}
"""
    on = _solve(src, infer.AnalysisConfig(instanceof_recovery=True))
    off = _solve(src, infer.BASIC)
    assert on.local_at((MAIN, 5), 1) == RAW_MINUS
    assert off.local_at((MAIN, 5), 1) == NULLABLE
    # the taken edge of ifeq carries no evidence
    assert on.local_at((MAIN, 6), 1) == NULLABLE


def test_deref_edge_refinement_only_with_flag():
    src = """
class A extends Object {
  field f ref
  ctor (0, 1) { return }
  static main (0, 2) {
    aconst_null
    store 1
    load 1
    getfield A.f
    pop
    nop
    return
  }
}
"""
    on = _solve(src, infer.AnalysisConfig(deref_edge_refinement=True))
    off = _solve(src, infer.BASIC)
    assert on.local_at((MAIN, 4), 1) == RAW_MINUS
    assert off.local_at((MAIN, 4), 1) == NULLABLE


# --- strong updates --------------------------------------------------------

def test_store_is_a_strong_update():
    src = """
class A extends Object {
  ctor (0, 1) { return }
  static main (0, 2) {
    aconst_null
    store 1
    new A
    dup
    invokespecial A.<init> 0
    store 1
    nop
    return
  }
}
"""
    sol = _solve(src, infer.BASIC)
    # after re-storing a constructed object the old Nullable is gone
    assert sol.local_at((MAIN, 6), 1) == NONNULL


def test_putfield_on_this_strongly_defines_the_field():
    sol = _solve("fullinit", infer.BASIC)
    ctor = ("C", "<init>", 0)
    assert sol.state.tvals[(ctor, 0)] == {"f"}
    # after the putfield the field is definitely initialized
    assert sol.state.tvals[(ctor, 5)] == frozenset()


def test_unwritten_ctor_field_forces_null_into_the_heap():
    src = """
class A extends Object {
  field f ref
  ctor (0, 1) { return }
  static main (0, 2) {
    new A
    dup
    invokespecial A.<init> 0
    store 1
    return
  }
}
"""
    basic = _solve(src, infer.BASIC)
    opt = _solve(src, infer.OPT)
    assert basic.heap_at("A.f") == NULLABLE
    assert opt.heap_at("A.f") == NULLABLE_INIT


# --- reading fields --------------------------------------------------------

class _H:
    def is_subclass(self, a, b):
        return b in {"A": ("A", "Object"), "B": ("B", "A", "Object"),
                     "Object": ("Object",)}[a]


def test_field_read_abstraction_cases():
    h = _H()
    hv = NONNULL
    f = infer.field_read_abstraction
    assert f(NONNULL, "A.f", hv, h) == hv
    assert f(NULLABLE_INIT, "A.f", hv, h) == hv
    assert f(raw("A"), "A.f", hv, h) == hv       # declaring class reached
    assert f(raw("A"), "B.f", hv, h) == NULLABLE  # declared deeper
    assert f(RAW_MINUS, "A.f", hv, h) == NULLABLE
    assert f(NULLABLE, "A.f", hv, h) == NULLABLE
    assert f(RAW_MINUS, "A.f", hv, h, trusted_via_this=True) == hv


# --- override variance -----------------------------------------------------

OVERRIDE_SRC = """
class A extends Object {
  field fa ref
  ctor (0, 1) { return }
  method m (1, 2) { aconst_null
    areturn }
  static main (0, 2) {
    new B
    dup
    invokespecial B.<init> 0
    store 1
    load 1
    aconst_null
    invokevirtual A.m 1
    pop
    return
  }
}
class B extends A {
  ctor (0, 1) {
    load 0
    invokespecial A.<init> 0
    return
  }
  method m (1, 2) { load 1
    areturn }
}
"""


def test_argument_contravariance_reaches_overrides():
    sol = _solve(OVERRIDE_SRC, infer.BASIC)
    # the call passes null against the declaration in A; the override in B
    # must admit it as well
    assert sol.state.methods[("A", "m", 1)].args[0] == NULLABLE
    assert sol.state.methods[("B", "m", 1)].args[0] == NULLABLE


def test_return_covariance_reaches_overridden():
    sol = _solve(OVERRIDE_SRC, infer.BASIC)
    # B.m returns its (nullable) argument; a call resolved through A must
    # account for that
    assert sol.state.methods[("B", "m", 1)].ret == NULLABLE
    assert sol.state.methods[("A", "m", 1)].ret == NULLABLE


def test_dynamic_dispatch_erases_init_assumptions():
    sol = _solve(OVERRIDE_SRC, infer.BASIC)
    # overriding method may be entered with any receiver state
    assert sol.state.methods[("B", "m", 1)].this_pre == frozenset()  # B: none
    assert sol.state.methods[("A", "m", 1)].post == frozenset({"fa"})


# --- solver cross-checks ---------------------------------------------------

def test_worklist_equals_naive_on_small_programs():
    for name in ("fullinit", "escape", "guard01", "inst02", "ninit02"):
        p = _load(name)
        for cfg in (infer.BASIC, infer.OPT):
            a = infer.solution_to_json(infer.solve(p, cfg))
            b = infer.solution_to_json(infer.solve_naive(p, cfg))
            assert a == b, name


def test_solution_serialization_deterministic():
    p = _load("guard03")
    assert infer.solution_to_json(infer.solve(p, infer.OPT)) == \
        infer.solution_to_json(infer.solve(p, infer.OPT))


def test_check_solution_accepts_fixpoint_and_rejects_lowered():
    p = _load("guard01")
    sol = infer.solve(p, infer.OPT)
    assert infer.check_solution(sol) == []
    lowered = infer.solve(p, infer.BASIC)
    mid = ("A", "id", 1)
    assert lowered.state.methods[mid].ret == NULLABLE
    lowered.state.methods[mid].ret = NONNULL
    assert infer.check_solution(lowered) != []


def test_constructor_call_on_fresh_object_is_not_a_dereference():
    sol = _solve("fullinit", infer.OPT)
    rep = infer.classify_dereferences(sol)
    # main's invokespecial on the freshly allocated C must not be counted
    assert ((("C", "main", 0), 2)) not in rep.entries
    cats = {rep.entries[p][0] for p in rep.entries}
    assert cats <= {"field read", "field write", "method call",
                    "array operation"}


def test_annotation_counts_shape():
    sol = _solve("fullinit", infer.OPT)
    ann = infer.derive_annotations(sol)
    counts = ann.counts()
    assert counts["fields"] == (1, 1)
    assert counts["parameters"] == (1, 1)
    assert counts["returns"] == (1, 1)
    assert ann.total_nonnull_pct() == 100.0
