import pytest

from nullit import alias, condition, ir


def _analyze(body: str, nlocals: int = 4):
    src = f"""
class A extends Object {{
  ctor (0, 1) {{ return }}
  static main (0, {nlocals}) {{
{body}
  }}
}}
"""
    p = ir.parse_program(src)
    h = ir.Hierarchy(p)
    ir.validate_stack_shapes(p, h)
    m = h.methods[p.entry]
    cfg = ir.build_cfg(m)
    al = alias.analyze_aliases(m, cfg, h)
    return condition.analyze_conditions(m, cfg, al, h), m


def test_instanceof_seeds_alias_set():
    body = """
    aconst_null
    store 1
    load 1
    instanceof A
    ifne L
  L:
    return
    """
    facts, _ = _analyze(body)
    assert facts.states[4][-1] == {1}
    assert facts.top_facts(4) == {1}


def test_iconst_carries_no_evidence():
    body = """
    iconst 1
    ifne L
  L:
    return
    """
    facts, _ = _analyze(body)
    assert facts.top_facts(1) == frozenset()


def test_store_kills_facts():
    # the tested local is reassigned between instanceof and the jump
    body = """
    aconst_null
    store 1
    load 1
    instanceof A
    aconst_null
    store 1
    ifne L
  L:
    return
    """
    facts, _ = _analyze(body)
    assert facts.top_facts(6) == frozenset()


def test_facts_survive_unrelated_instructions():
    body = """
    aconst_null
    store 1
    load 1
    instanceof A
    aconst_null
    store 2
    nop
    ifne L
  L:
    return
    """
    facts, _ = _analyze(body)
    assert facts.top_facts(7) == {1}


def test_merge_intersects_facts():
    body = """
    aconst_null
    store 1
    aconst_null
    store 2
    iconst 1
    ifeq Lelse
    load 1
    instanceof A
    goto Lend
  Lelse:
    load 2
    instanceof A
  Lend:
    ifne Ldone
  Ldone:
    return
    """
    facts, _ = _analyze(body)
    assert facts.top_facts(11) == frozenset()


def test_branch_refinement_polarity():
    body = """
    aconst_null
    store 1
    load 1
    instanceof A
    ifne L
  L:
    return
    """
    facts, _ = _analyze(body)
    assert condition.branch_refinement(facts, 4, "ifne", edge_taken=True) == {1}
    assert condition.branch_refinement(facts, 4, "ifne", edge_taken=False) == frozenset()
    assert condition.branch_refinement(facts, 4, "ifeq", edge_taken=False) == {1}
    assert condition.branch_refinement(facts, 4, "ifeq", edge_taken=True) == frozenset()
    with pytest.raises(ValueError):
        condition.branch_refinement(facts, 4, "goto", edge_taken=True)
