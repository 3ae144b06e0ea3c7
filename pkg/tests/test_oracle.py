import pytest

from nullit import gen, infer, ir, oracle
from nullit.domain import NONNULL, NULLABLE, NULLABLE_INIT, RAW_MINUS, raw
from nullit.oracle import ObjSnap, UNASSIGNED


def _load(name):
    with open(f"corpus/{name}.nir") as fh:
        return ir.parse_program(fh.read())


def _hier(p):
    return ir.Hierarchy(p)


# --- execution basics ------------------------------------------------------

def test_full_init_constructor_trace():
    p = _load("fullinit")
    tr = oracle.run(p)
    assert tr.status == "returned"
    done = [ev for s in tr.steps for ev in s.events
            if ev[0] == "ctor_done" and ev[1] == "C"]
    assert done, "constructor completion must be recorded"
    _, cls, snap, ref_values = done[0]
    assert snap.undef == frozenset()
    assert {"Object", "C"} <= set(snap.constructed)
    (fid, value), = ref_values
    assert fid == "C.f" and isinstance(value, ObjSnap)


def test_escaped_this_reads_null_field():
    # a helper called from the constructor observes the implicit null
    p = _load("escape")
    tr = oracle.run(p)
    assert tr.status == "returned"
    m_steps = [s for s in tr.steps if s.mid == ("C", "m", 1)]
    assert m_steps
    entry = m_steps[0]
    assert isinstance(entry.locals[1], ObjSnap)
    assert "C.f" in entry.locals[1].undef
    ret = [s for s in m_steps if s.pc == 2][0]
    assert ret.stack[-1] is None  # the field still held null


def test_omega_on_null_dereference():
    src = """
class A extends Object {
  field f ref
  static main (0, 2) {
    aconst_null
    store 1
    load 1
    getfield A.f
    pop
    return
  }
}
"""
    tr = oracle.run(ir.parse_program(src))
    assert tr.status == "omega"
    assert tr.fault == (("A", "main", 0), 3)


def test_budget_on_infinite_loop():
    src = "class A extends Object { static main(0,1){ goto L\n L: goto L } }"
    tr = oracle.run(ir.parse_program(src), budget=500)
    assert tr.status == "budget"
    assert len(tr.steps) == 500


def test_unwritten_field_implicitly_null_but_initialized():
    src = """
class A extends Object {
  field f ref
  ctor (0, 1) { return }
  static main (0, 2) {
    new A
    dup
    invokespecial A.<init> 0
    store 1
    load 1
    getfield A.f
    pop
    return
  }
}
"""
    tr = oracle.run(ir.parse_program(src))
    assert tr.status == "returned"
    read = [s for s in tr.steps if s.mid == ("A", "main", 0) and s.pc == 5][0]
    obj = read.stack[-1]
    assert obj.undef == frozenset()  # fully initialized at constructor end
    after = [s for s in tr.steps if s.mid == ("A", "main", 0) and s.pc == 6][0]
    assert after.stack[-1] is None   # ... but the value read is null


def test_determinism_across_replays():
    for seed in (0, 5, 9):
        p = gen.gen_program(seed)
        t1 = oracle.run(p, budget=800, seed=3)
        t2 = oracle.run(p, budget=800, seed=3)
        assert t1.status == t2.status
        assert t1.steps == t2.steps


def _all_snaps(step):
    for v in step.stack:
        if isinstance(v, ObjSnap):
            yield v
    for v in step.locals:
        if isinstance(v, ObjSnap):
            yield v


def test_def_flags_and_constructed_sets_are_monotone():
    for seed in range(15):
        p = gen.gen_program(seed)
        h = _hier(p)
        tr = oracle.run(p, budget=800, seed=seed)
        undef_of, cons_of = {}, {}
        for step in tr.steps:
            for snap in _all_snaps(step):
                if snap.is_array:
                    continue
                prev = undef_of.get(snap.loc)
                if prev is not None:
                    assert snap.undef <= prev, "a field went back to undef"
                undef_of[snap.loc] = snap.undef
                prevc = cons_of.get(snap.loc)
                if prevc is not None:
                    assert prevc <= snap.constructed
                cons_of[snap.loc] = snap.constructed
            for ev in step.events:
                if ev[0] == "ctor_done":
                    _, cls, snap, _ = ev
                    # constructors complete bottom-up along the chain
                    assert set(h.ancestors(cls)) <= set(snap.constructed)


# --- the correctness relation ---------------------------------------------

def _snap(loc=0, cls="C", undef=(), constructed=("Object", "C")):
    return ObjSnap(loc, cls, frozenset(undef), frozenset(constructed))


@pytest.fixture(scope="module")
def fullinit_h():
    return _hier(_load("fullinit"))


def test_satisfies_nonnull(fullinit_h):
    assert oracle.satisfies(NONNULL, _snap(), fullinit_h)
    assert not oracle.satisfies(NONNULL, _snap(undef=["C.f"]), fullinit_h)
    assert not oracle.satisfies(NONNULL, None, fullinit_h)


def test_satisfies_raw_family(fullinit_h):
    partial = _snap(undef=["C.f"], constructed=["Object"])
    assert oracle.satisfies(RAW_MINUS, partial, fullinit_h)
    assert not oracle.satisfies(RAW_MINUS, None, fullinit_h)
    assert oracle.satisfies(raw("Object"), partial, fullinit_h)
    assert not oracle.satisfies(raw("C"), partial, fullinit_h)
    assert oracle.satisfies(raw("C"), _snap(), fullinit_h)


def test_satisfies_nullable_family(fullinit_h):
    assert oracle.satisfies(NULLABLE, None, fullinit_h)
    assert oracle.satisfies(NULLABLE_INIT, None, fullinit_h)
    assert oracle.satisfies(NULLABLE_INIT, _snap(), fullinit_h)
    assert not oracle.satisfies(NULLABLE_INIT, _snap(undef=["C.f"]), fullinit_h)


# --- trace checking against solutions -------------------------------------

def test_check_correctness_accepts_sound_solution():
    p = _load("escape")
    sol = infer.solve(p, infer.OPT)
    tr = oracle.run(p)
    assert oracle.check_correctness(tr, sol) == []


def test_check_correctness_rejects_lowered_heap():
    p = _load("ninit02")  # A.f legitimately holds null after construction
    sol = infer.solve(p, infer.OPT)
    assert sol.heap_at("A.f") != NONNULL
    sol.state.heap["A.f"] = NONNULL  # deliberately below the fixpoint
    tr = oracle.run(p)
    viol = oracle.check_correctness(tr, sol)
    assert viol and any("A.f" in v for v in viol)


def test_check_dereference_safety():
    src = """
class A extends Object {
  field f ref
  static main (0, 2) {
    aconst_null
    store 1
    load 1
    getfield A.f
    pop
    return
  }
}
"""
    p = ir.parse_program(src)
    sol = infer.solve(p, infer.OPT)
    rep = infer.classify_dereferences(sol)
    tr = oracle.run(p)
    assert tr.status == "omega"
    assert oracle.check_dereference_safety(tr, rep) == []  # honest: unsafe
    point = (("A", "main", 0), 3)
    rep.entries[point] = ("field read", True)  # liar
    assert oracle.check_dereference_safety(tr, rep) != []
