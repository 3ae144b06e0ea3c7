"""Instrumented concrete interpreter and trace-based soundness checks.

The interpreter executes a program from its entry method with null
reference inputs and records, before every instruction, a snapshot of
the current frame (stack and locals) plus any heap events the
instruction produces.  Reference values in snapshots carry the
referenced object's class, its set of still-uninitialized fields and the
set of classes whose constructor has completed on it, frozen at snapshot
time, so the checks can replay a finished trace without re-running the
program.

`check_correctness` confronts a trace with an inference result: every
abstract value must describe the concrete value that actually occupied
the slot, field annotations must hold for every write to (and at
construction completion of) a constructed object, and initialization
facts about `this` must match the object's real state.

Null dereferences stop execution with status ``omega``;
`check_dereference_safety` asserts that no dereference classified safe
ever faults.

Fields never assigned by a constructor are implicitly initialized to
null (or 0) when the constructor finishes: afterwards the object is
fully initialized, just possibly with null-valued fields.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Set, Tuple, Union

from . import ir
from .domain import AVal, Kind, NONNULL

UNASSIGNED = object()  # local slot never written on this path


class _Obj:
    __slots__ = ("loc", "cls", "fields", "defs", "constructed")

    def __init__(self, loc: int, cls: str):
        self.loc = loc
        self.cls = cls
        self.fields: Dict[ir.FieldId, object] = {}
        self.defs: Set[ir.FieldId] = set()
        self.constructed: Set[str] = set()


class _Arr:
    __slots__ = ("loc", "cells")

    def __init__(self, loc: int, length: int):
        self.loc = loc
        self.cells: List[object] = [None] * length


@dataclass(frozen=True)
class ObjSnap:
    """A reference value as seen at one instant."""
    loc: int
    cls: Optional[str]              # None for arrays
    undef: FrozenSet[ir.FieldId]
    constructed: FrozenSet[str]
    length: Optional[int] = None    # arrays only

    @property
    def is_array(self) -> bool:
        return self.cls is None


Value = Union[None, int, ObjSnap]  # in snapshots; runtime uses _Obj/_Arr


@dataclass(frozen=True)
class Step:
    mid: ir.MethodId
    pc: int
    stack: Tuple[Value, ...]
    locals: Tuple[object, ...]       # Value or UNASSIGNED
    events: Tuple[tuple, ...] = ()
    # events: ("field_write", fid, receiver ObjSnap after, value snapshot)
    #         ("ctor_done", cls, ObjSnap after, ((fid, value snapshot), ...))

    @property
    def point(self) -> ir.ProgramPoint:
        return (self.mid, self.pc)


@dataclass
class Trace:
    program: ir.Program
    hierarchy: ir.Hierarchy
    seed: int
    status: str                      # returned | omega | budget | runtime-error
    steps: List[Step]
    fault: Optional[ir.ProgramPoint] = None
    error: Optional[str] = None
    result: object = None


class _Omega(Exception):
    pass


class _RuntimeError(Exception):
    pass


class _Frame:
    __slots__ = ("mid", "m", "pc", "stack", "locals")

    def __init__(self, mid: ir.MethodId, m: ir.MethodDecl, args: List[object]):
        self.mid = mid
        self.m = m
        self.pc = 0
        self.stack: List[object] = []
        self.locals: List[object] = list(args) + \
            [UNASSIGNED] * (m.locals_count - len(args))


def run(program: ir.Program, budget: int = 100_000, seed: int = 0,
        hierarchy: Optional[ir.Hierarchy] = None,
        shapes: Optional[ir.StackShapes] = None) -> Trace:
    """Execute from the entry method; reference inputs are null,
    integer inputs are drawn from the seeded generator."""
    h = hierarchy or ir.Hierarchy(program)
    interp = _Interp(program, h, budget, seed, shapes)
    return interp.run()


class _Interp:
    def __init__(self, program: ir.Program, h: ir.Hierarchy,
                 budget: int, seed: int,
                 shapes: Optional[ir.StackShapes] = None):
        self.program = program
        self.h = h
        self.budget = budget
        self.rng = random.Random(seed)
        self.seed = seed
        self.shapes = shapes
        self.next_loc = 0
        self.steps: List[Step] = []
        self.events: List[tuple] = []
        self._fids: Dict[str, Tuple[str, ...]] = {}

    # --- snapshots -------------------------------------------------------

    def snap(self, v) -> Value:
        if v is None or isinstance(v, int):
            return v
        if isinstance(v, _Arr):
            return ObjSnap(v.loc, None, frozenset(), frozenset(),
                           length=len(v.cells))
        fids = self._fids.get(v.cls)
        if fids is None:
            fids = tuple(ir.field_id(cls, f.name)
                         for cls, f in self.h.all_fields(v.cls))
            self._fids[v.cls] = fids
        undef = frozenset(f for f in fids if f not in v.defs)
        return ObjSnap(v.loc, v.cls, undef, frozenset(v.constructed))

    # --- execution -------------------------------------------------------

    def run(self) -> Trace:
        entry = self.program.entry
        m = self.h.methods[entry]
        shapes = self.shapes or ir.validate_stack_shapes(self.program, self.h)
        kinds = shapes.param_kinds[entry]
        args = [None if k == ir.REF else self.rng.randint(0, 1)
                for k in kinds]
        frames = [_Frame(entry, m, args)]
        status, fault, error, result = "budget", None, None, None
        remaining = self.budget
        while frames:
            if remaining <= 0:
                status = "budget"
                break
            remaining -= 1
            fr = frames[-1]
            pc = fr.pc
            ins = fr.m.code[pc]
            self.events = []
            rec_stack = tuple(self.snap(v) for v in fr.stack)
            rec_locals = tuple(
                v if v is UNASSIGNED else self.snap(v)
                for v in fr.locals)
            mid = fr.mid
            try:
                result = self._step(frames, fr, ins)
            except _Omega:
                fault = (mid, pc)
                status = "omega"
                self._record(mid, pc, rec_stack, rec_locals)
                break
            except _RuntimeError as e:
                fault = (mid, pc)
                status = "runtime-error"
                error = str(e)
                self._record(mid, pc, rec_stack, rec_locals)
                break
            self._record(mid, pc, rec_stack, rec_locals)
            if not frames:
                status = "returned"
                break
        return Trace(self.program, self.h, self.seed, status, self.steps,
                     fault, error, result)

    def _record(self, mid, pc, rec_stack, rec_locals):
        # the snapshot was taken before executing; events are attached after
        self.steps.append(Step(mid, pc, rec_stack, rec_locals,
                               tuple(self.events)))

    def _step(self, frames: List[_Frame], fr: _Frame, ins: ir.Instr):
        op = ins.op
        stack = fr.stack
        h = self.h
        result = None

        def deref(v):
            if v is None:
                raise _Omega()
            return v

        if op == "nop":
            fr.pc += 1
        elif op == "goto":
            fr.pc = ins.target
        elif op == "aconst_null":
            stack.append(None)
            fr.pc += 1
        elif op == "iconst":
            stack.append(ins.num)
            fr.pc += 1
        elif op == "load":
            v = fr.locals[ins.num]
            if v is UNASSIGNED:
                raise _RuntimeError(f"load of unassigned local {ins.num}")
            stack.append(v)
            fr.pc += 1
        elif op == "store":
            fr.locals[ins.num] = stack.pop()
            fr.pc += 1
        elif op == "dup":
            stack.append(stack[-1])
            fr.pc += 1
        elif op == "pop":
            stack.pop()
            fr.pc += 1
        elif op == "new":
            obj = _Obj(self.next_loc, ins.cls)
            self.next_loc += 1
            stack.append(obj)
            fr.pc += 1
        elif op == "instanceof":
            v = stack.pop()
            ok = isinstance(v, _Obj) and h.is_subclass(v.cls, ins.cls)
            stack.append(1 if ok else 0)
            fr.pc += 1
        elif op == "getfield":
            obj = deref(stack.pop())
            if not isinstance(obj, _Obj):
                raise _RuntimeError("getfield on non-object")
            fid = ir.field_id(ins.cls, ins.member)
            fdecl = next(f for f in h.fields_of(ins.cls)
                         if f.name == ins.member)
            default = None if fdecl.kind == ir.REF else 0
            stack.append(obj.fields.get(fid, default))
            fr.pc += 1
        elif op == "putfield":
            v = stack.pop()
            obj = deref(stack.pop())
            if not isinstance(obj, _Obj):
                raise _RuntimeError("putfield on non-object")
            fid = ir.field_id(ins.cls, ins.member)
            obj.fields[fid] = v
            obj.defs.add(fid)
            self.events.append(
                ("field_write", fid, self.snap(obj), self.snap(v)))
            fr.pc += 1
        elif op in ("invokevirtual", "invokestatic", "invokespecial"):
            args = [stack.pop() for _ in range(ins.num)][::-1]
            if op == "invokestatic":
                tgt = h.resolve(ins.cls, ins.member, ins.num, (ir.STATIC,))
                callee_args = args
            elif op == "invokevirtual":
                rcv = deref(stack.pop())
                if not isinstance(rcv, _Obj):
                    raise _RuntimeError("virtual call on non-object")
                tgt = h.resolve(rcv.cls, ins.member, ins.num, (ir.VIRTUAL,))
                callee_args = [rcv] + args
            else:
                rcv = deref(stack.pop())
                if not isinstance(rcv, _Obj):
                    raise _RuntimeError("constructor call on non-object")
                tgt = h.ctor_of(ins.cls)
                callee_args = [rcv] + args
            if tgt is None:
                raise _RuntimeError(f"unresolved call {ins.cls}.{ins.member}")
            m = h.methods[tgt]
            if m.kind == ir.CTOR and tgt[0] != ir.OBJECT \
                    and h.super_of[tgt[0]] == ir.OBJECT:
                callee_args[0].constructed.add(ir.OBJECT)  # implicit super
            frames.append(_Frame(tgt, m, callee_args))
        elif op in ("areturn", "return"):
            ret = stack.pop() if op == "areturn" else None
            if fr.m.kind == ir.CTOR:
                self._finish_ctor(fr)
            frames.pop()
            if frames:
                caller = frames[-1]
                if op == "areturn":
                    caller.stack.append(ret)
                caller.pc += 1
            else:
                result = ret
        elif op == "ifnull":
            fr.pc = ins.target if stack.pop() is None else fr.pc + 1
        elif op == "ifnonnull":
            fr.pc = ins.target if stack.pop() is not None else fr.pc + 1
        elif op == "ifeq":
            fr.pc = ins.target if stack.pop() == 0 else fr.pc + 1
        elif op == "ifne":
            fr.pc = ins.target if stack.pop() != 0 else fr.pc + 1
        elif op == "newarray":
            n = stack.pop()
            arr = _Arr(self.next_loc, n)
            self.next_loc += 1
            stack.append(arr)
            fr.pc += 1
        elif op == "aaload":
            idx = stack.pop()
            arr = deref(stack.pop())
            if not isinstance(arr, _Arr):
                raise _RuntimeError("aaload on non-array")
            if not 0 <= idx < len(arr.cells):
                raise _RuntimeError(f"index {idx} out of bounds")
            stack.append(arr.cells[idx])
            fr.pc += 1
        elif op == "aastore":
            v = stack.pop()
            idx = stack.pop()
            arr = deref(stack.pop())
            if not isinstance(arr, _Arr):
                raise _RuntimeError("aastore on non-array")
            if not 0 <= idx < len(arr.cells):
                raise _RuntimeError(f"index {idx} out of bounds")
            arr.cells[idx] = v
            fr.pc += 1
        elif op == "arraylength":
            arr = deref(stack.pop())
            if not isinstance(arr, _Arr):
                raise _RuntimeError("arraylength on non-array")
            stack.append(len(arr.cells))
            fr.pc += 1
        else:
            raise AssertionError(op)
        return result

    def _finish_ctor(self, fr: _Frame):
        obj = fr.locals[0]
        cls = fr.mid[0]
        # fields never assigned are implicitly initialized to null / 0
        for f in self.h.fields_of(cls):
            fid = ir.field_id(cls, f.name)
            if fid not in obj.defs:
                obj.fields[fid] = None if f.kind == ir.REF else 0
                obj.defs.add(fid)
        obj.constructed.add(cls)
        ref_values = tuple(
            (ir.field_id(cls, f.name),
             self.snap(obj.fields[ir.field_id(cls, f.name)]))
            for f in self.h.fields_of(cls) if f.kind == ir.REF
        )
        self.events.append(("ctor_done", cls, self.snap(obj), ref_values))


# ---------------------------------------------------------------------------
# trace checks
# ---------------------------------------------------------------------------

def satisfies(aval: AVal, v: Value, hierarchy: ir.Hierarchy) -> bool:
    """Does the abstract value describe this concrete snapshot value?"""
    if aval.kind is Kind.NULLABLE:
        return True
    if v is None:
        return aval.kind is Kind.NULLABLE_INIT
    if not isinstance(v, ObjSnap):
        return False  # integer in a reference slot: kind confusion
    if aval.kind is Kind.RAW_MINUS:
        return True
    if v.is_array:
        return True  # arrays have no fields: initialized by construction
    if aval.kind in (Kind.NONNULL, Kind.NULLABLE_INIT):
        return not v.undef
    if aval.kind is Kind.RAW:
        required = {
            ir.field_id(anc, f.name)
            for anc in hierarchy.ancestors(aval.cls)
            for f in hierarchy.fields_of(anc)
        }
        universe = {
            ir.field_id(cls, f.name)
            for cls, f in hierarchy.all_fields(v.cls)
        }
        return required <= universe and not (required & v.undef)
    raise AssertionError(aval)


def check_correctness(trace: Trace, solution) -> List[str]:
    """All violations of the inference result along one execution."""
    h = trace.hierarchy
    st = solution.state
    violations: List[str] = []

    def bad(step: Step, msg: str):
        violations.append(f"{step.mid[0]}.{step.mid[1]}:{step.pc}: {msg}")

    for step in trace.steps:
        point = step.point
        abs_stack = st.stacks.get(point)
        if abs_stack is None:
            bad(step, "executed point not covered by the analysis")
            continue
        if len(abs_stack) != len(step.stack):
            bad(step, "stack height mismatch with analysis")
            continue
        for i, (a, v) in enumerate(zip(abs_stack, step.stack)):
            if a is None or isinstance(v, int):
                continue
            if not satisfies(a, v, h):
                bad(step, f"stack slot {i}: {a} does not admit {v}")
        abs_locals = st.locals.get(point, {})
        for r, v in enumerate(step.locals):
            if v is UNASSIGNED or isinstance(v, int):
                continue
            a = abs_locals.get(r, NONNULL)
            if not satisfies(a, v, h):
                bad(step, f"local {r}: {a} does not admit {v}")
        m = h.methods[step.mid]
        if m.has_this() and isinstance(step.locals[0], ObjSnap):
            claimed_undef = st.tvals.get(point, frozenset())
            this = step.locals[0]
            for f in h.fields_of(step.mid[0]):
                fid = ir.field_id(step.mid[0], f.name)
                if fid in this.undef and f.name not in claimed_undef:
                    bad(step, f"field {f.name} claimed initialized "
                              f"but is not")
        for ev in step.events:
            if ev[0] == "field_write":
                _, fid, rcv, value = ev
                decl_cls = fid.split(".", 1)[0]
                if decl_cls in rcv.constructed and not isinstance(value, int):
                    a = st.heap.get(fid, NONNULL)
                    if not satisfies(a, value, h):
                        bad(step, f"heap {fid}: {a} does not admit {value}")
            elif ev[0] == "ctor_done":
                _, cls, _rcv, ref_values = ev
                for fid, value in ref_values:
                    a = st.heap.get(fid, NONNULL)
                    if not satisfies(a, value, h):
                        bad(step, f"heap {fid} at construction end: "
                                  f"{a} does not admit {value}")
    return violations


def check_dereference_safety(trace: Trace, report) -> List[str]:
    """A dereference classified safe must never fault."""
    if trace.status != "omega" or trace.fault is None:
        return []
    if report.is_safe(trace.fault) is True:
        (cls, name, _), pc = trace.fault
        return [f"{cls}.{name}:{pc}: dereference classified safe "
                f"faulted on null"]
    return []
