import pytest

from nullit import alias, ir


def _analyze(body: str, nlocals: int = 4, extra: str = ""):
    src = f"""
class A extends Object {{
  field f ref
  ctor (0, 1) {{ return }}
  static main (0, {nlocals}) {{
{body}
  }}
}}
{extra}
"""
    p = ir.parse_program(src)
    h = ir.Hierarchy(p)
    ir.validate_stack_shapes(p, h)
    m = h.methods[p.entry]
    return alias.analyze_aliases(m, ir.build_cfg(m), h), m


def test_load_pushes_singleton():
    st, _ = _analyze("aconst_null\nstore 2\nload 2\npop\nreturn")
    assert st.slot_aliases(3, 0) == {2}


def test_store_kills_local_in_other_slots():
    # two copies of local 1 on the stack; storing into 1 kills both claims
    body = """
    aconst_null
    store 1
    load 1
    load 1
    store 1
    pop
    return
    """
    st, _ = _analyze(body)
    # after `store 1` (pc 4) the remaining slot no longer aliases 1
    assert st.slot_aliases(5, 0) == frozenset()


def test_store_records_local_equality():
    # load 1; store 3; load 3 -> slot aliases both 3 and 1
    body = """
    aconst_null
    store 1
    load 1
    store 3
    load 3
    pop
    return
    """
    st, _ = _analyze(body)
    assert st.slot_aliases(5, 0) == {1, 3}


def test_diamond_merge_intersects():
    body = """
    aconst_null
    store 1
    iconst 1
    ifeq Lelse
    load 1
    goto Lend
  Lelse:
    load 1
    store 3
    load 3
  Lend:
    pop
    return
    """
    st, _ = _analyze(body)
    # merge of {1} and {1,3} is {1}
    end_pc = 9  # the `pop` after Lend
    assert st.slot_aliases(end_pc, 0) == {1}


def test_getfield_result_not_a_local_copy():
    body = """
    new A
    dup
    invokespecial A.<init> 0
    store 1
    load 1
    getfield A.f
    pop
    return
    """
    extra = ""
    src_ctor = """
    """
    st, _ = _analyze(body)
    assert st.slot_aliases(6, 0) == frozenset()


def test_new_is_fresh_until_constructed():
    body = """
    new A
    dup
    invokespecial A.<init> 0
    pop
    return
    """
    st, _ = _analyze(body)
    _, fresh0 = st.slot(1, 0)
    _, fresh1 = st.slot(2, 0)
    assert fresh0 == 0 and fresh1 == 0  # token = pc of the new
    _, fresh_after = st.slot(3, 0)
    assert fresh_after is None


def test_store_propagates_to_fresh_copies():
    body = """
    new A
    dup
    store 1
    invokespecial A.<init> 0
    return
    """
    st, _ = _analyze(body)
    aliases, fresh = st.slot(3, 0)
    assert aliases == {1} and fresh == 0


def test_unreachable_point_is_all_unknown():
    body = """
    goto L
    nop
  L:
    return
    """
    st, _ = _analyze(body)
    assert not st.reachable(1)
    assert st.slot_aliases(1, 0) == frozenset()


def test_this_tracked_in_virtual_method():
    src = """
class A extends Object {
  field f ref
  ctor (0, 1) { return }
  method m (0, 1) {
    load 0
    getfield A.f
    areturn
  }
  static main (0, 1) { return }
}
"""
    p = ir.parse_program(src)
    h = ir.Hierarchy(p)
    m = h.methods[("A", "m", 0)]
    st = alias.analyze_aliases(m, ir.build_cfg(m), h)
    assert st.slot_aliases(1, 0) == {0}
