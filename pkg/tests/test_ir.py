import pytest

from nullit import ir
from nullit.ir import NirError, NirValidationError

MINIMAL = "class A extends Object { static main(0,1){ return } }"

# transliteration of the motivating class whose constructor escapes `this`
# into a helper before initializing the field
ESCAPE_SRC = """
class C extends Object {
  field f ref
  ctor (0, 1) {
    load 0
    load 0
    invokevirtual C.m 1
    pop
    load 0
    new Object
    dup
    invokespecial Object.<init> 0
    putfield C.f
    return
  }
  method m (1, 2) {
    load 1
    getfield C.f
    areturn
  }
  static main (0, 1) {
    new C
    dup
    invokespecial C.<init> 0
    store 0
    return
  }
}
"""


def test_parse_minimal():
    p = ir.parse_program(MINIMAL)
    assert len(p.classes) == 1
    assert p.entry == ("A", "main", 0)


def test_parse_escape_shape():
    p = ir.parse_program(ESCAPE_SRC)
    assert len(p.classes) == 1
    c = p.classes[0]
    assert [m.name for m in c.methods] == ["<init>", "m", "main"]
    assert c.fields == (ir.FieldDecl("f", "ref"),)


def test_unresolved_superclass():
    with pytest.raises(NirValidationError, match="undeclared class B"):
        ir.parse_program("class A extends B { static main(0,1){ return } }")


def test_duplicate_class():
    src = MINIMAL + "\nclass A extends Object { }"
    with pytest.raises(NirValidationError, match="duplicate class A"):
        ir.parse_program(src)


def test_inheritance_cycle():
    src = """
    class A extends B { static main(0,1){ return } }
    class B extends A { }
    """
    with pytest.raises(NirValidationError, match="cycle"):
        ir.parse_program(src)


def test_missing_main():
    with pytest.raises(NirValidationError, match="exactly one static main"):
        ir.parse_program("class A extends Object { }")


def test_syntax_error_carries_line():
    with pytest.raises(ir.NirSyntaxError) as exc:
        ir.parse_program("class A extends Object {\n  wat\n}")
    assert exc.value.line == 2


def test_fall_off_end_rejected():
    src = "class A extends Object { static main(0,1){ nop } }"
    with pytest.raises(NirValidationError, match="fall off"):
        ir.parse_program(src)


def test_roundtrip_canonical():
    for src in (MINIMAL, ESCAPE_SRC):
        p = ir.parse_program(src)
        text = ir.print_program(p)
        assert ir.parse_program(text) == p
        assert ir.print_program(ir.parse_program(text)) == text


# --- hierarchy -------------------------------------------------------------

HIER = """
class A extends Object {
  ctor (0, 1) { return }
  method m (1, 2) { aconst_null areturn }
  static main (0, 1) { return }
}
"""


def _hier_src():
    # Object <- A <- B, Object <- A <- C; B overrides m
    return """
class A extends Object {
  ctor (0, 1) { return }
  method m (1, 2) { aconst_null
    areturn }
  static main (0, 2) {
    new B
    dup
    invokespecial B.<init> 0
    store 0
    load 0
    load 0
    invokevirtual A.m 1
    store 1
    return
  }
}
class B extends A {
  ctor (0, 1) {
    load 0
    invokespecial A.<init> 0
    return
  }
  method m (1, 2) { aconst_null
    areturn }
}
class C extends A {
  ctor (0, 1) {
    load 0
    invokespecial A.<init> 0
    return
  }
}
"""


def test_lcs():
    h = ir.Hierarchy(ir.parse_program(_hier_src()))
    assert h.least_common_superclass("A", "A") == "A"
    assert h.least_common_superclass("B", "C") == "A"
    assert h.least_common_superclass("B", "Object") == "Object"


def test_overrides_strict_direction():
    h = ir.Hierarchy(ir.parse_program(_hier_src()))
    assert h.overrides(("B", "m", 1), ("A", "m", 1))
    assert not h.overrides(("A", "m", 1), ("B", "m", 1))
    assert not h.overrides(("A", "m", 1), ("A", "m", 1))


def test_partial_order_of_subclassing():
    h = ir.Hierarchy(ir.parse_program(_hier_src()))
    names = list(h.class_index)
    for a in names:
        assert h.is_subclass(a, a)
    for a in names:
        for b in names:
            if h.is_subclass(a, b) and h.is_subclass(b, a):
                assert a == b


def test_reachability_cha_and_dead_code():
    src = _hier_src() + """
class U extends Object {
  static unused (0, 1) { return }
}
"""
    p = ir.parse_program(src)
    h = ir.Hierarchy(p)
    reach = ir.reachable_methods(p, h)
    assert ("A", "m", 1) in reach
    assert ("B", "m", 1) in reach  # CHA: override of the static target
    assert ("U", "unused", 0) not in reach
    assert ("C", "<init>", 0) not in reach


def test_reachability_entry_only():
    p = ir.parse_program(MINIMAL)
    assert ir.reachable_methods(p, ir.Hierarchy(p)) == {("A", "main", 0)}


# --- cfg -------------------------------------------------------------------

def test_cfg_edges():
    src = """
class A extends Object {
  field f ref
  static main (0, 1) {
    aconst_null
    store 0
    load 0
    ifnull L
    load 0
    getfield A.f
    pop
  L:
    goto M
  M:
    return
  }
}
"""
    p = ir.parse_program(src)
    m = p.classes[0].methods[0]
    cfg = ir.build_cfg(m)
    assert cfg[3] == [(4, ir.NORMAL), (7, ir.NORMAL)]  # ifnull
    assert cfg[5] == [(6, ir.DEREF)]                    # getfield
    assert cfg[7] == [(8, ir.NORMAL)]                   # goto
    assert cfg[8] == []                                 # return


# --- stack shapes ----------------------------------------------------------

def _shapes(src):
    p = ir.parse_program(src)
    return p, ir.validate_stack_shapes(p)


def test_shapes_simple():
    src = "class A extends Object { static main(0,1){ aconst_null\nareturn } }"
    p, shapes = _shapes(src)
    mid = ("A", "main", 0)
    assert shapes.height((mid, 0)) == 0
    assert shapes.height((mid, 1)) == 1
    assert shapes.kinds[(mid, 1)] == ("ref",)


def test_shapes_kind_mismatch():
    src = "class A extends Object { static main(0,1){ iconst 1\nareturn } }"
    with pytest.raises(NirValidationError, match="expected ref"):
        _shapes(src)


def test_shapes_merge_height_mismatch():
    src = """
class A extends Object {
  static main (0, 1) {
    iconst 0
    ifeq L
    aconst_null
  L:
    return
  }
}
"""
    with pytest.raises(NirValidationError, match="inconsistent stack heights"):
        _shapes(src)


def test_shapes_underflow():
    src = "class A extends Object { static main(0,1){ pop\nreturn } }"
    with pytest.raises(NirValidationError, match="underflow"):
        _shapes(src)


def test_param_kind_inferred_from_call_site():
    src = """
class A extends Object {
  static f (1, 1) { return }
  static main (0, 1) {
    iconst 1
    invokestatic A.f 1
    return
  }
}
"""
    _, shapes = _shapes(src)
    assert shapes.param_kinds[("A", "f", 1)] == ("int",)


def test_param_kind_conflict_across_call_sites():
    src = """
class A extends Object {
  static f (1, 1) { return }
  static main (0, 1) {
    iconst 1
    invokestatic A.f 1
    aconst_null
    invokestatic A.f 1
    return
  }
}
"""
    with pytest.raises(NirValidationError, match="kind mismatch|expected"):
        _shapes(src)


def test_ctor_prefix_convention_enforced():
    src = """
class A extends Object {
  ctor (0, 1) { return }
  static main (0, 1) { return }
}
class B extends A {
  ctor (0, 1) { return }
}
"""
    with pytest.raises(NirValidationError, match="must begin with"):
        ir.parse_program(src)
